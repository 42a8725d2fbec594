// greenhyp: command-line driver. Exit codes: 0 all checks pass, 1 a check
// failed, 2 bad input (config, flags or referenced files).

#include "CLI11.hpp"
#include "greenhyp/cli.hpp"

#include <chrono>
#include <iostream>

namespace {

struct Command {
    CLI::App* app;
    std::string name;
};

} // namespace

int main(int argc, char** argv)
{
    using namespace greenhyp;
    CLI::App app{"Green's operators of hyperbolic systems on 1+1 spacetimes"};
    app.require_subcommand(1);
    cli::Options o;
    std::string out = ".";

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "config file")->check(CLI::ExistingFile);
        sub->add_option("--out", out, "artifact directory (created if missing)");
        sub->add_option("--seed", o.seed, "seed overriding [run] seed");
        sub->add_flag("--quiet", o.quiet, "print nothing on success");
    };

    auto* classify = app.add_subcommand("classify", "classify a PL support set");
    common(classify);
    classify->add_option("--set", o.set, "PL set file")->check(CLI::ExistingFile);

    auto* solve = app.add_subcommand("solve", "solve P u = f with zero initial data");
    common(solve);
    solve->add_option("--source", o.source, "bump file")->check(CLI::ExistingFile);

    auto* green = app.add_subcommand("green", "apply a Green's operator and check P G f = f");
    common(green);
    green->add_option("--op", o.op)->check(CLI::IsMember({"box", "box2", "dirac", "kg", "proca", "custom"}));
    green->add_option("--side", o.side)->check(CLI::IsMember({"adv", "ret", "advanced", "retarded"}));
    green->add_option("--strategy", o.strategy)->check(CLI::IsMember({"kernel", "cauchy", "compose", "sqrt"}));
    green->add_option("--source", o.source, "bump file")->check(CLI::ExistingFile);

    auto* verify = app.add_subcommand("verify", "run a structural check");
    common(verify);
    verify->add_option("check", o.check)
        ->required()
        ->check(CLI::IsMember(
            {"energy", "speed", "exact-seq", "reciprocity", "restriction", "duality", "diagram"}));
    verify->add_option("--set", o.set, "PL set file (duality)")->check(CLI::ExistingFile);
    verify->add_option("--source", o.source, "bump file")->check(CLI::ExistingFile);
    verify->add_option("--op", o.op)->check(CLI::IsMember({"box", "box2", "dirac", "kg", "proca", "custom"}));
    verify->add_option("--side", o.side)->check(CLI::IsMember({"adv", "ret", "advanced", "retarded"}));
    verify->add_option("--strategy", o.strategy)->check(CLI::IsMember({"kernel", "cauchy", "compose", "sqrt"}));
    verify->add_option("--size", o.size, "corpus size (diagram)");

    auto* conv = app.add_subcommand("convergence", "refinement study of P G f = f");
    common(conv);
    conv->add_option("--levels", o.levels, "number of grids")->check(CLI::Range(2, 8));
    conv->add_option("--op", o.op)->check(CLI::IsMember({"box", "box2", "dirac", "kg", "proca", "custom"}));
    conv->add_option("--side", o.side)->check(CLI::IsMember({"adv", "ret", "advanced", "retarded"}));
    conv->add_option("--strategy", o.strategy)->check(CLI::IsMember({"kernel", "cauchy", "compose", "sqrt"}));
    conv->add_option("--source", o.source, "bump file")->check(CLI::ExistingFile);

    auto* corpus = app.add_subcommand("corpus", "generate a deterministic corpus");
    common(corpus);
    corpus->add_option("kind", o.kind)->required()->check(CLI::IsMember({"plsets", "systems", "sources"}));
    corpus->add_option("--size", o.size, "number of members");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        const auto start = std::chrono::steady_clock::now();
        cli::Result r = cli::run(command, o);
        r.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        cli::write_artifacts(r, out);
        const bool pass = r.report.pass();
        if (!o.quiet || !pass) {
            for (const auto* f : r.report.failures())
                std::cerr << "FAIL " << f->name << ' ' << format_double(f->value) << ' ' << f->cmp() << ' '
                          << format_double(f->threshold) << '\n';
            if (!o.quiet)
                std::cout << r.report.command << ": " << (r.has_checks ? (pass ? "PASS" : "FAIL") : "done") << " ("
                          << r.report.rows.size() << " rows, " << format_short(r.report.wall_seconds) << " s) -> "
                          << out << '\n';
        }
        return pass ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "greenhyp " << command << ": " << e.what() << '\n';
        return e.kind() == ErrorKind::precondition ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "greenhyp " << command << ": " << e.what() << '\n';
        return 2;
    }
}
