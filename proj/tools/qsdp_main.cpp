// qsdp: solve quantum state estimation and marginal problems from JSON files.
//
//   qsdp problem.json              human-readable report on stdout
//   qsdp --json problem.json       machine-readable JSON report
//   qsdp --validate problem.json   schema check only, never solves
//   qsdp --batch dir/              run every *.json in a directory
//
// Exit codes: 0 solved/feasible, 2 certified infeasible, 1 input error,
// 3 solver failure. Batch mode aggregates: worst error class wins.

#include <qsdp/cli.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

using qsdp::cli::json;

int aggregate(int acc, int code) {
    // 1 (bad input) dominates, then 3 (solver failure), then 2 (infeasible)
    auto rank = [](int c) {
        switch (c) {
            case 1: return 3;
            case 3: return 2;
            case 2: return 1;
            default: return 0;
        }
    };
    return rank(code) > rank(acc) ? code : acc;
}

int run_one(const std::string& path, const qsdp::cli::RunOptions& ropt, bool as_json,
            bool validate_only) {
    json root;
    {
        std::ifstream in(path);
        if (!in) {
            std::cerr << path << ": cannot open file\n";
            return 1;
        }
        try {
            root = json::parse(in);
        } catch (const json::parse_error& e) {
            std::cerr << path << ": " << e.what() << "\n";
            return 1;
        }
    }
    if (validate_only) {
        const auto errors = qsdp::cli::validate_problem(root);
        for (const auto& e : errors) std::cerr << path << ": " << e << "\n";
        if (errors.empty()) std::cout << path << ": ok\n";
        return errors.empty() ? 0 : 1;
    }
    const auto out = qsdp::cli::run_problem(root, ropt);
    if (as_json)
        std::cout << out.report.dump(2) << "\n";
    else
        std::cout << qsdp::cli::render_prose(out.report);
    return out.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum state estimation and marginal-compatibility solver"};
    app.get_formatter()->column_width(28);

    std::string file;
    std::string batch_dir;
    bool as_json = false;
    bool validate_only = false;
    qsdp::cli::RunOptions ropt;

    app.add_option("file", file, "JSON problem file");
    app.add_flag("--json", as_json, "emit the full JSON report instead of prose");
    app.add_flag("--recheck", ropt.recheck,
                 "re-verify the reported answer with independent arithmetic");
    app.add_flag("--validate", validate_only, "check the file against the schema and exit");
    app.add_option("--tol", ropt.tol, "duality-gap tolerance for the interior-point solver");
    app.add_option("--max-iter", ropt.max_iter, "iteration cap for the interior-point solver");
    app.add_option("--seed", ropt.seed, "run label echoed into the report (solves are deterministic)");
    app.add_option("--batch", batch_dir, "run every *.json file in a directory, in sorted order");

    CLI11_PARSE(app, argc, argv);

    if (batch_dir.empty() && file.empty()) {
        std::cerr << app.help();
        return 1;
    }

    if (!batch_dir.empty()) {
        namespace fs = std::filesystem;
        std::vector<std::string> paths;
        std::error_code ec;
        for (const auto& entry : fs::directory_iterator(batch_dir, ec))
            if (entry.is_regular_file() && entry.path().extension() == ".json")
                paths.push_back(entry.path().string());
        if (ec) {
            std::cerr << batch_dir << ": " << ec.message() << "\n";
            return 1;
        }
        std::sort(paths.begin(), paths.end());
        int acc = 0;
        for (const auto& p : paths) {
            if (!as_json) std::cout << "== " << p << "\n";
            acc = aggregate(acc, run_one(p, ropt, as_json, validate_only));
        }
        return acc;
    }
    return run_one(file, ropt, as_json, validate_only);
}
