// SPDX-License-Identifier: Apache-2.0
#include "tad/cli.hpp"

#include "tad/elem_deriv.hpp"
#include "tad/evaluator.hpp"
#include "tad/parser.hpp"
#include "tad/printer.hpp"

#include <CLI11.hpp>

#include <algorithm>

namespace tad {

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Reverse-mode derivatives of element-wise tensor functions", "tad"};
    app.require_subcommand(1);

    std::string file;
    std::string arg;
    VerifyOptions vopt;
    bool json = false;

    auto* derive_cmd = app.add_subcommand("derive", "print the adjoint of every argument");
    derive_cmd->add_option("file", file, "input .tad file")->required();

    auto* jac_cmd = app.add_subcommand("jacobian", "print the Jacobian with respect to one argument");
    jac_cmd->add_option("file", file, "input .tad file")->required();
    jac_cmd->add_option("--arg", arg, "argument name")->required();

    auto* verify_cmd = app.add_subcommand("verify", "check derivatives against numeric references");
    verify_cmd->add_option("file", file, "input .tad file")->required();
    verify_cmd->add_option("--trials", vopt.trials, "random trials")->check(CLI::PositiveNumber);
    verify_cmd->add_option("--tol", vopt.tol, "relative tolerance for finite differences")->check(CLI::PositiveNumber);
    verify_cmd->add_option("--seed", vopt.seed, "random seed");
    verify_cmd->add_flag("--json", json, "print the report as JSON");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "tad: " << e.what() << "\n";
        return 1;
    }

    try {
        ElemFuncSpec spec = parse_spec_file(file);
        for (const auto& w : spec.warnings) err << file << ": warning: " << w << "\n";
        if (derive_cmd->parsed()) {
            out << print_derivation(derive(spec));
            return 0;
        }
        if (jac_cmd->parsed()) {
            out << print_spec(derive_jacobian(spec, arg));
            return 0;
        }
        VerifyReport report = verify(spec, vopt);
        out << (json ? report.json() + "\n" : report.text());
        return report.pass() ? 0 : 2;
    } catch (const Error& e) {
        err << file << ": " << e.what() << "\n";
        return 1;
    }
}

}  // namespace tad
