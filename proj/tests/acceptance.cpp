// Runs acceptance criteria 1-12 in one process (the suites share cached
// solutions and ensembles) and prints one PASS/FAIL line per criterion.
#include <chrono>
#include <cstdio>
#include <exception>
#include <string>

#include "rwsbi/experiments.hpp"

using namespace rwsbi;

int main(int argc, char** argv) {
    int first = 1, last = 12;
    if (argc == 2) first = last = std::stoi(argv[1]);
    int failed = 0;
    for (int n = first; n <= last; ++n) {
        ExperimentConfig config;
        config.suite = "ac" + std::to_string(n);
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool pass = false;
        try {
            const auto records = run_suite(config);
            pass = all_pass(records);
            for (const auto& r : records) {
                if (r.pass) continue;
                detail += " [" + r.check + " = " + format_number(r.statistic) + " not in [" + format_number(r.lower) +
                          ", " + format_number(r.upper) + "]]";
            }
        } catch (const std::exception& e) {
            detail = std::string(" error: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("AC%d %s (%.1fs)%s\n", n, pass ? "PASS" : "FAIL", secs, detail.c_str());
        std::fflush(stdout);
        if (!pass) ++failed;
    }
    std::printf("%d of %d criteria passed\n", last - first + 1 - failed, last - first + 1);
    return failed == 0 ? 0 : 1;
}
