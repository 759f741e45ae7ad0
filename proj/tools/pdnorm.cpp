// pdnorm: command-line front end for the normal-form and linearization tools.
//
//   pdnorm analyze --spec FILE
//   pdnorm prepare --spec FILE [--m INT] [--q FLOAT]
//   pdnorm radius --spec FILE
//   pdnorm linearize --spec FILE [--points INT] [--degree INT] [--tol FLOAT] [--trajectory]
//   pdnorm map-linearize --spec FILE [--points INT] [--degree INT] [--tol FLOAT] [--trajectory]
//   pdnorm verify --spec FILE [--report FILE]
//
// Reports go to DIR/report.json (DIR = --out, default out/<input hash>).
// Exit codes: 0 success, 2 invalid input, 3 numerical failure.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <pdnorm/cli/commands.hpp>

namespace fs = std::filesystem;
using pdnorm::cli::json;

namespace
{

std::string utc_now()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_file(const fs::path &p, const std::string &contents)
{
    std::ofstream out(p, std::ios::binary);
    if (!out) {
        throw pdnorm::InvalidInput("cannot write " + p.string());
    }
    out << contents;
}

int report_error(const std::string &name, const std::string &message, int code, bool as_json)
{
    if (as_json) {
        json e;
        e["error"] = name;
        e["message"] = message;
        e["exit_code"] = code;
        std::cerr << e.dump() << "\n";
    } else {
        std::cerr << "pdnorm: " << name << ": " << message << "\n";
    }
    return code;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Poincare-Dulac normal forms and linearizations of holomorphic vector fields and maps"};
    app.require_subcommand(1);
    pdnorm::cli::request req;
    bool json_errors = false;
    std::string out_dir, report_path;
    double tol = 0, q = 0;
    int degree = 0, m = 0;
    std::size_t points = 0;
    std::uint64_t seed = 0;

    const char *commands[] = {"analyze", "prepare", "radius", "linearize", "map-linearize", "verify"};
    for (const char *name : commands) {
        auto *sub = app.add_subcommand(name);
        sub->add_option("--spec", req.spec_path, "problem specification (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--tol", tol, "target accuracy")->check(CLI::PositiveNumber);
        sub->add_option("--degree", degree, "Taylor degree")->check(CLI::PositiveNumber);
        sub->add_option("--points", points, "number of sample points");
        sub->add_option("--seed", seed, "sampling seed");
        sub->add_option("--m", m, "flatness order");
        sub->add_option("--q", q, "flatness margin q > 1");
        sub->add_flag("--json-errors", json_errors, "report errors as JSON on stderr");
        sub->add_flag("--trajectory", req.trajectory, "write trajectory.csv for the first sample");
        if (std::string(name) == "verify") {
            sub->add_option("--report", report_path, "stored report (default out/<hash>/report.json)");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        return report_error("InvalidInput", e.what(), 2, json_errors);
    }

    CLI::App *sub = app.get_subcommands().front();
    req.command = sub->get_name();
    if (sub->count("--tol")) {
        req.tol = tol;
    }
    if (sub->count("--q")) {
        req.q = q;
    }
    if (sub->count("--degree")) {
        req.degree = degree;
    }
    if (sub->count("--m")) {
        req.m = m;
    }
    if (sub->count("--points")) {
        req.points = points;
    }
    if (sub->count("--seed")) {
        req.seed = seed;
    }

    try {
        const auto start = std::chrono::steady_clock::now();
        const std::string bytes = pdnorm::cli::read_file(req.spec_path);
        const std::string hash = pdnorm::cli::input_hash(bytes);
        const fs::path dir = out_dir.empty() ? fs::path("out") / hash : fs::path(out_dir);

        json stored;
        if (req.command == "verify") {
            const fs::path rp = report_path.empty() ? fs::path("out") / hash / "report.json" : fs::path(report_path);
            try {
                stored = json::parse(pdnorm::cli::read_file(rp.string()));
            } catch (const json::parse_error &e) {
                throw pdnorm::InvalidInput("stored report is not valid JSON: " + std::string(e.what()));
            }
        }
        auto res = pdnorm::cli::run(req, bytes, req.command == "verify" ? &stored : nullptr);

        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        res.report["provenance"]["timestamp"] = json{{"utc", utc_now()}, {"elapsed_seconds", elapsed}};

        fs::create_directories(dir);
        const std::string name = req.command == "verify" ? "verify.json" : "report.json";
        write_file(dir / name, res.report.dump(2) + "\n");
        for (const auto &[file, contents] : res.files) {
            write_file(dir / file, contents);
        }
        std::cout << (dir / name).string() << "\n";
        if (res.exit_code != 0) {
            return report_error("VerificationFailed", "recomputed values differ from the stored report",
                                res.exit_code, json_errors);
        }
        return 0;
    } catch (const pdnorm::error &e) {
        return report_error(std::string(e.name()), e.what(), pdnorm::is_numerical(e.code()) ? 3 : 2, json_errors);
    } catch (const json::exception &e) {
        return report_error("InvalidInput", e.what(), 2, json_errors);
    } catch (const fs::filesystem_error &e) {
        return report_error("InvalidInput", e.what(), 2, json_errors);
    }
}
