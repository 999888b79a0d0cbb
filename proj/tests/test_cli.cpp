// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tad/cli.hpp"

#include <json.hpp>

#include <sstream>

using namespace tad;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string spec_path(const std::string& name) { return std::string(TAD_SPEC_DIR) + "/" + name; }

std::size_t count(const std::string& text, const std::string& what)
{
    std::size_t n = 0;
    for (auto p = text.find(what); p != std::string::npos; p = text.find(what, p + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("derive prints the input and one line per argument")
{
    Run r = run({"derive", spec_path("example6.tad")});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("Input: f[i; j] = ", 0) == 0);
    CHECK(count(r.out, "Derivative of f wrt. ") == 4);
    CHECK(r.out.find("Derivative of f wrt. d: dd[dd_0] = ") != std::string::npos);
    CHECK(r.err.empty());
}

TEST_CASE("jacobian prints a spec with the combined indices")
{
    Run r = run({"jacobian", spec_path("sine.tad"), "--arg", "x"});
    CHECK(r.code == 0);
    CHECK(r.out.find("df_dx") != std::string::npos);

    Run missing = run({"jacobian", spec_path("sine.tad")});
    CHECK(missing.code == 1);
    Run unknown = run({"jacobian", spec_path("sine.tad"), "--arg", "nope"});
    CHECK(unknown.code == 1);
    CHECK_FALSE(unknown.err.empty());
}

TEST_CASE("verify passes on the example and reports JSON")
{
    Run r = run({"verify", spec_path("matmul.tad"), "--trials", "2", "--seed", "3"});
    CHECK(r.code == 0);
    CHECK(r.out.find("PASS") != std::string::npos);

    Run j = run({"verify", spec_path("matmul.tad"), "--trials", "1", "--json"});
    CHECK(j.code == 0);
    auto doc = nlohmann::json::parse(j.out);
    CHECK(doc["pass"] == true);
    CHECK(doc["trials"] == 1);
}

TEST_CASE("errors return a nonzero status")
{
    Run none = run({});
    CHECK(none.code == 1);
    Run file = run({"derive", spec_path("does_not_exist.tad")});
    CHECK(file.code == 1);
    CHECK(file.err.find("does_not_exist.tad") != std::string::npos);
    Run flag = run({"verify", spec_path("sine.tad"), "--trials", "-3"});
    CHECK(flag.code == 1);
    Run cmd = run({"integrate", spec_path("sine.tad")});
    CHECK(cmd.code == 1);
}

TEST_CASE("help exits cleanly")
{
    Run r = run({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("derive") != std::string::npos);
}
