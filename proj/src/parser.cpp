// SPDX-License-Identifier: Apache-2.0
#include "tad/parser.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace tad {

namespace {

enum class Tok { Ident, Number, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    int line = 1;
    int col = 1;
};

[[noreturn]] void fail(ErrorCode code, int line, int col, const std::string& msg)
{
    throw Error(code, "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + msg);
}

struct Statement {
    std::string text;
    int line = 1;
};

// Splits at newlines outside brackets and drops comments.
std::vector<Statement> split_statements(const std::string& src)
{
    std::vector<Statement> out;
    Statement cur{"", 1};
    int depth = 0;
    int line = 1;
    bool comment = false;
    auto flush = [&] {
        bool blank = true;
        for (char c : cur.text)
            if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
        if (!blank) out.push_back(cur);
    };
    for (char c : src) {
        if (c == '\n') {
            comment = false;
            ++line;
            if (depth == 0) {
                flush();
                cur = {"", line};
                continue;
            }
            cur.text += c;
            continue;
        }
        if (comment) continue;
        if (c == '#') {
            comment = true;
            continue;
        }
        if (c == '(' || c == '[' || c == '{') ++depth;
        if ((c == ')' || c == ']' || c == '}') && depth > 0) --depth;
        cur.text += c;
    }
    flush();
    return out;
}

std::vector<Token> tokenize(const std::string& text, int first_line)
{
    std::vector<Token> out;
    int line = first_line, col = 1;
    std::size_t i = 0;
    auto bump = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k, ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            bump(1);
            continue;
        }
        Token t{Tok::Punct, "", line, col};
        const bool after_brace = !out.empty() && out.back().kind == Tok::Punct && out.back().text == "}";
        if (c == '_' && after_brace) {
            t.text = "_";
            bump(1);
        } else if (std::isalpha(c) || c == '_') {
            std::size_t j = i;
            while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
            t.kind = Tok::Ident;
            t.text = text.substr(i, j - i);
            bump(j - i);
        } else if (std::isdigit(c)) {
            std::size_t j = i;
            while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
            if (j + 1 < text.size() && text[j] == '.' && std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
                ++j;
                while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
            }
            t.kind = Tok::Number;
            t.text = text.substr(i, j - i);
            bump(j - i);
        } else if (text.compare(i, 2, "**") == 0 || text.compare(i, 2, ">=") == 0) {
            t.text = text.substr(i, 2);
            bump(2);
        } else if (std::string("[](){};:,+-*/^=%").find(static_cast<char>(c)) != std::string::npos) {
            t.text = std::string(1, static_cast<char>(c));
            bump(1);
        } else {
            fail(ErrorCode::SyntaxError, line, col, std::string("unexpected character '") + static_cast<char>(c) + "'");
        }
        out.push_back(std::move(t));
    }
    out.push_back({Tok::End, "", line, col});
    return out;
}

Rational parse_number(const std::string& s)
{
    // Leading zeros would make the Integer constructor read octal.
    auto digits = [](std::string d) {
        d.erase(0, std::min(d.find_first_not_of('0'), d.size() - 1));
        return Integer(d);
    };
    auto dot = s.find('.');
    if (dot == std::string::npos) return Rational(digits(s));
    std::string frac = s.substr(dot + 1);
    Integer den = 1;
    for (std::size_t k = 0; k < frac.size(); ++k) den *= 10;
    return Rational(digits(s.substr(0, dot) + frac), den);
}

const std::set<std::string> kFunctions = {"exp", "log", "sin", "cos", "sinh", "cosh", "sqrt"};
const std::set<std::string> kReserved = {"sum", "if", "then", "else", "max", "min", "exp",
                                         "log", "sin", "cos", "sinh", "cosh", "sqrt"};

UnaryOp function_op(const std::string& name)
{
    if (name == "exp") return UnaryOp::Exp;
    if (name == "log") return UnaryOp::Log;
    if (name == "sin") return UnaryOp::Sin;
    if (name == "cos") return UnaryOp::Cos;
    if (name == "sinh") return UnaryOp::Sinh;
    if (name == "cosh") return UnaryOp::Cosh;
    return UnaryOp::Sqrt;
}

class ExprParser {
public:
    ExprParser(std::vector<Token> toks, const ShapeTable& tensors) : toks_(std::move(toks)), tensors_(tensors) {}

    void bind(const IndexSymbol& s) { scope_.push_back({s.name, s}); }

    const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
    bool at(const std::string& punct, std::size_t ahead = 0) const
    {
        return peek(ahead).kind == Tok::Punct && peek(ahead).text == punct;
    }
    bool at_ident(const std::string& word) const { return peek().kind == Tok::Ident && peek().text == word; }
    Token take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

    [[noreturn]] void error(const std::string& msg, ErrorCode code = ErrorCode::SyntaxError) const
    {
        fail(code, peek().line, peek().col, msg);
    }

    void expect(const std::string& punct)
    {
        if (!at(punct)) error("expected '" + punct + "'" + found());
        take();
    }

    void expect_word(const std::string& word)
    {
        if (!at_ident(word)) error("expected '" + word + "'" + found());
        take();
    }

    std::string found() const
    {
        if (peek().kind == Tok::End) return " but reached the end of the statement";
        return " but found '" + peek().text + "'";
    }

    Token ident()
    {
        if (peek().kind != Tok::Ident) error("expected a name" + found());
        return take();
    }

    void expect_end()
    {
        if (peek().kind != Tok::End) error("unexpected '" + peek().text + "'");
    }

    // ------------------------------------------------------------ expressions

    Expr expression() { return additive(); }

private:
    struct Value {
        Expr e;
        bool literal = false;
    };

    Expr additive()
    {
        Expr lhs = multiplicative().e;
        while (at("+") || at("-")) {
            bool plus = take().text == "+";
            Expr rhs = multiplicative().e;
            lhs = plus ? lhs + rhs : lhs - rhs;
        }
        return lhs;
    }

    Value multiplicative()
    {
        Value lhs = unary_expr();
        while (at("*") || at("/")) {
            bool mul = take().text == "*";
            Value rhs = unary_expr();
            if (!mul && lhs.literal && rhs.literal && rhs.e->value != 0) {
                lhs = {constant(lhs.e->value / rhs.e->value), false};
                continue;
            }
            lhs = {mul ? lhs.e * rhs.e : lhs.e / rhs.e, false};
        }
        return lhs;
    }

    Value unary_expr()
    {
        if (at("-")) {
            if (peek(1).kind == Tok::Number && !at("**", 2)) {
                take();
                return {constant(-parse_number(take().text)), true};
            }
            take();
            return {-unary_expr().e, false};
        }
        return power();
    }

    Value power()
    {
        Value base = atom();
        if (!at("**")) return base;
        take();
        return {pow(base.e, unary_expr().e), false};
    }

    Value atom()
    {
        const Token& t = peek();
        if (t.kind == Tok::Number) {
            take();
            return {constant(parse_number(t.text)), true};
        }
        if (at("(")) {
            take();
            Expr e = additive();
            expect(")");
            return {e, false};
        }
        if (t.kind != Tok::Ident) error("expected an expression" + found());
        if (t.text == "sum") return {sum()};
        if (t.text == "if") return {conditional()};
        if (kFunctions.count(t.text)) {
            take();
            expect("(");
            Expr arg = additive();
            expect(")");
            return {unary(function_op(t.text), arg)};
        }
        return {tensor()};
    }

    Expr tensor()
    {
        Token name = take();
        auto it = tensors_.find(name.text);
        if (it == tensors_.end()) {
            if (lookup(name.text)) fail(ErrorCode::SyntaxError, name.line, name.col, "index '" + name.text + "' used as a value");
            fail(ErrorCode::UndeclaredTensor, name.line, name.col, "undeclared tensor '" + name.text + "'");
        }
        std::vector<AffineForm> idx;
        if (at("[")) {
            take();
            if (!at("]")) {
                for (;;) {
                    const Token& start = peek();
                    AffineForm f = affine(ErrorCode::NonAffineIndex);
                    if (!f.is_integral())
                        fail(ErrorCode::NonAffineIndex, start.line, start.col, "index of '" + name.text + "' is not integral");
                    idx.push_back(std::move(f));
                    if (!at(";")) break;
                    take();
                }
            }
            expect("]");
        }
        if (idx.size() != it->second.size())
            fail(ErrorCode::ShapeMismatch, name.line, name.col,
                 "'" + name.text + "' has rank " + std::to_string(it->second.size()) + " but " + std::to_string(idx.size()) +
                     " indices are given");
        return tensor_ref(name.text, std::move(idx));
    }

    Expr sum()
    {
        take();
        expect("{");
        Token k = ident();
        expect("}");
        expect("_");
        RangeBound lo = bound(BoundDirection::Lower);
        expect("^");
        RangeBound hi = bound(BoundDirection::Upper);

        // A binder that shadows an index in scope is renamed.
        IndexSymbol binder{k.text, IndexKind::Sum};
        for (int n = 2; lookup(binder.name) || tensors_.count(binder.name); ++n) binder.name = k.text + "_" + std::to_string(n);
        scope_.push_back({k.text, binder});
        if (!at("(")) error("expected '(' before the sum body" + found());
        Expr body = atom().e;
        scope_.pop_back();
        return sum_over(binder, std::move(lo), std::move(hi), body);
    }

    RangeBound bound(BoundDirection dir)
    {
        const char* word = dir == BoundDirection::Lower ? "max" : "min";
        bool wrapped = at("(") && peek(1).kind == Tok::Ident && (peek(1).text == "max" || peek(1).text == "min");
        if (wrapped) take();
        RangeBound b{dir, {}};
        if (at_ident("max") || at_ident("min")) {
            if (!at_ident(word)) error(std::string("expected '") + word + "' in this bound");
            take();
            expect("[");
            for (;;) {
                b.forms.push_back(affine(ErrorCode::NonAffineSumBound));
                if (!at(";")) break;
                take();
            }
            expect("]");
        } else {
            if (wrapped) error("expected 'max' or 'min'");
            b.forms.push_back(affine_unary(ErrorCode::NonAffineSumBound));
        }
        if (wrapped) expect(")");
        return b;
    }

    Expr conditional()
    {
        take();
        expect("{");
        Condition c = condition();
        expect("}");
        expect_word("then");
        expect("(");
        Expr t = additive();
        expect(")");
        expect_word("else");
        expect("(");
        Expr e = additive();
        expect(")");
        return delta_if(c, t, e);
    }

    Condition condition()
    {
        AffineForm lhs = affine(ErrorCode::NonAffineIndex);
        if (at("%")) {
            take();
            if (peek().kind != Tok::Number) error("expected an integer modulus" + found());
            Rational m = parse_number(take().text);
            if (!is_integer(m) || m == 0) error("the modulus must be a nonzero integer");
            expect("=");
            AffineForm rhs = affine(ErrorCode::NonAffineIndex);
            if (!(rhs == AffineForm(0))) error("a divisibility condition must compare with 0");
            return Condition::divisible(lhs, numerator_of(m));
        }
        if (at(">=")) {
            take();
            return Condition::non_negative(lhs - affine(ErrorCode::NonAffineIndex));
        }
        expect("=");
        return Condition::equal_zero(lhs - affine(ErrorCode::NonAffineIndex));
    }

    // ------------------------------------------------------------ affine forms

    std::optional<IndexSymbol> lookup(const std::string& name) const
    {
        for (auto it = scope_.rbegin(); it != scope_.rend(); ++it)
            if (it->first == name) return it->second;
        return std::nullopt;
    }

    AffineForm affine(ErrorCode code)
    {
        AffineForm f = affine_mul(code);
        while (at("+") || at("-")) {
            bool plus = take().text == "+";
            AffineForm g = affine_mul(code);
            f = plus ? f + g : f - g;
        }
        return f;
    }

    AffineForm affine_mul(ErrorCode code)
    {
        AffineForm f = affine_unary(code);
        while (at("*") || at("/")) {
            const Token op = take();
            AffineForm g = affine_unary(code);
            if (op.text == "*") {
                if (g.is_constant())
                    f = f * g.constant();
                else if (f.is_constant())
                    f = g * f.constant();
                else
                    fail(code, op.line, op.col, "product of two index expressions is not affine");
            } else {
                if (!g.is_constant() || g.constant() == 0)
                    fail(code, op.line, op.col, "division is only allowed by a nonzero constant");
                f = f * (Rational(1) / g.constant());
            }
        }
        return f;
    }

    AffineForm affine_unary(ErrorCode code)
    {
        if (at("-")) {
            take();
            return -affine_unary(code);
        }
        const Token& t = peek();
        if (t.kind == Tok::Number) {
            take();
            return AffineForm(parse_number(t.text));
        }
        if (at("(")) {
            take();
            AffineForm f = affine(code);
            expect(")");
            return f;
        }
        if (t.kind == Tok::Ident) {
            if (auto s = lookup(t.text)) {
                take();
                return AffineForm::symbol(*s);
            }
            if (tensors_.count(t.text) || kFunctions.count(t.text))
                fail(code, t.line, t.col, "'" + t.text + "' cannot appear in an index expression");
            fail(ErrorCode::UnknownSymbol, t.line, t.col, "unknown index '" + t.text + "'");
        }
        error("expected an index expression" + found());
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    const ShapeTable& tensors_;
    std::vector<std::pair<std::string, IndexSymbol>> scope_;
};

bool is_declaration(const std::string& text)
{
    std::size_t i = 0;
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == text.size() || !(std::isalpha(static_cast<unsigned char>(text[i])) || text[i] == '_')) return false;
    while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_')) ++i;
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    return i < text.size() && text[i] == ':';
}

std::pair<std::string, std::vector<std::int64_t>> parse_declaration(const Statement& st)
{
    const std::string& s = st.text;
    auto colon = s.find(':');
    std::string name = s.substr(0, colon);
    name.erase(0, name.find_first_not_of(" \t\r"));
    name.erase(name.find_last_not_of(" \t\r") + 1);

    std::string rest = s.substr(colon + 1);
    // The multiplication sign is two bytes in UTF-8.
    for (std::size_t p; (p = rest.find("\xC3\x97")) != std::string::npos;) rest.replace(p, 2, " x ");
    std::vector<std::int64_t> shape;
    std::vector<std::string> words;
    std::string tok;
    for (char c : rest) {
        if (std::isdigit(static_cast<unsigned char>(c)) || std::isalpha(static_cast<unsigned char>(c))) {
            if (!tok.empty() && (std::isdigit(static_cast<unsigned char>(tok.back())) != 0) !=
                                    (std::isdigit(static_cast<unsigned char>(c)) != 0)) {
                words.push_back(tok);
                tok.clear();
            }
            tok += c;
        } else {
            if (!tok.empty()) words.push_back(tok);
            tok.clear();
            if (!std::isspace(static_cast<unsigned char>(c)))
                fail(ErrorCode::SyntaxError, st.line, 1, std::string("unexpected '") + c + "' in shape of '" + name + "'");
        }
    }
    if (!tok.empty()) words.push_back(tok);

    if (words.size() == 1 && words[0] == "scalar") return {name, {}};
    for (std::size_t k = 0; k < words.size(); ++k) {
        if (k % 2 == 1) {
            if (words[k] != "x") fail(ErrorCode::SyntaxError, st.line, 1, "expected 'x' between dimensions of '" + name + "'");
            continue;
        }
        if (!std::isdigit(static_cast<unsigned char>(words[k][0])))
            fail(ErrorCode::SyntaxError, st.line, 1, "expected a dimension in shape of '" + name + "'");
        std::int64_t v = std::stoll(words[k]);
        if (v <= 0) fail(ErrorCode::ShapeMismatch, st.line, 1, "dimensions of '" + name + "' must be positive");
        shape.push_back(v);
    }
    if (shape.empty() || words.size() % 2 == 0)
        fail(ErrorCode::SyntaxError, st.line, 1, "malformed shape for '" + name + "'");
    return {name, shape};
}

}  // namespace

ElemFuncSpec parse_spec(const std::string& text)
{
    ShapeTable shapes;
    std::vector<std::string> order;
    std::optional<Statement> definition;
    for (const auto& st : split_statements(text)) {
        if (is_declaration(st.text)) {
            auto [name, shape] = parse_declaration(st);
            if (kReserved.count(name)) fail(ErrorCode::SyntaxError, st.line, 1, "'" + name + "' is a reserved word");
            if (shapes.count(name)) fail(ErrorCode::DuplicateIndex, st.line, 1, "'" + name + "' declared twice");
            shapes[name] = shape;
            order.push_back(name);
            continue;
        }
        if (definition) fail(ErrorCode::SyntaxError, st.line, 1, "only one function definition is allowed");
        definition = st;
    }
    if (!definition) throw Error(ErrorCode::SyntaxError, "no function definition found");

    ExprParser p(tokenize(definition->text, definition->line), shapes);
    Token name = p.ident();
    std::vector<IndexSymbol> indices;
    if (p.at("[")) {
        p.take();
        if (!p.at("]")) {
            for (;;) {
                Token t = p.ident();
                IndexSymbol s{t.text, IndexKind::Output};
                for (const auto& prev : indices)
                    if (prev == s) fail(ErrorCode::DuplicateIndex, t.line, t.col, "index '" + t.text + "' repeated");
                if (shapes.count(t.text)) fail(ErrorCode::SyntaxError, t.line, t.col, "index '" + t.text + "' names a tensor");
                indices.push_back(s);
                if (!p.at(";")) break;
                p.take();
            }
        }
        p.expect("]");
    }
    p.expect("=");
    auto fshape = shapes.find(name.text);
    if (fshape == shapes.end())
        fail(ErrorCode::UndeclaredTensor, name.line, name.col, "no shape declared for function '" + name.text + "'");
    if (fshape->second.size() != indices.size())
        fail(ErrorCode::ShapeMismatch, name.line, name.col, "'" + name.text + "' is declared with rank " +
                                                                std::to_string(fshape->second.size()));

    ShapeTable args = shapes;
    args.erase(name.text);
    ExprParser body_parser(tokenize(definition->text, definition->line), args);
    // Re-read the header so the body parser starts at the expression.
    while (!body_parser.at("=")) body_parser.take();
    body_parser.take();
    for (const auto& s : indices) body_parser.bind(s);
    Expr body = body_parser.expression();
    body_parser.expect_end();

    std::vector<ArgumentDecl> decls;
    for (const auto& n : order)
        if (n != name.text) decls.push_back({n, shapes[n]});
    return build_spec(name.text, fshape->second, indices, decls, body);
}

ElemFuncSpec parse_spec_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::SyntaxError, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_spec(ss.str());
}

Expr parse_expression(const std::string& text, const ShapeTable& tensors, const std::vector<IndexSymbol>& free)
{
    ExprParser p(tokenize(text, 1), tensors);
    for (const auto& s : free) p.bind(s);
    Expr e = p.expression();
    p.expect_end();
    return e;
}

}  // namespace tad
