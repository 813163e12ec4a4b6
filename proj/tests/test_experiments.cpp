#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rwsbi/errors.hpp"
#include "rwsbi/experiments.hpp"

using namespace rwsbi;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("rwsbi_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("config parsing") {
    std::istringstream in("# comment\nsuite = ac5\ngamma = 2.5\nsign = minus\nreplicas = 10\n"
                          "tol.smoke.runtime = 20\n\n");
    const auto c = ExperimentConfig::parse(in);
    CHECK(c.suite == "ac5");
    CHECK(c.gamma == 2.5);
    CHECK(c.sign == Sign::Minus);
    CHECK(c.replicas == std::size_t{10});
    CHECK(c.tolerance("smoke.runtime") == 20.0);
    CHECK_NOTHROW(c.validate());

    ExperimentConfig d;
    CHECK_THROWS_AS(d.set("colour", "blue"), ConfigError);
    CHECK_THROWS_AS(d.set("gamma", "x1"), ConfigError);
    CHECK_THROWS_AS(d.set("replicas", "-3"), ConfigError);
    CHECK_THROWS_AS(d.set("sign", "up"), ConfigError);
    CHECK_THROWS_AS(d.set("tol.no_such", "1"), ConfigError);
    CHECK_THROWS_AS(d.tolerance("no_such"), ConfigError);
    std::istringstream bad("gamma 2\n");
    CHECK_THROWS_AS(ExperimentConfig::parse(bad), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/rwsbi.cfg"), ConfigError);

    d.epsilon = 1.0;
    CHECK_THROWS_AS(d.validate(), ConfigError);
}

TEST_CASE("unknown suite lists the available ones") {
    ExperimentConfig c;
    c.suite = "nope";
    try {
        c.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("smoke") != std::string::npos);
        CHECK(msg.find("ac12") != std::string::npos);
    }
}

TEST_CASE("smoke suite passes quickly and reproduces byte for byte") {
    ExperimentConfig c;
    const auto start = std::chrono::steady_clock::now();
    const auto recs = run_suite(c);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(secs < 10.0);
    CHECK(all_pass(recs));
    CHECK_FALSE(recs.empty());

    std::ostringstream a, b;
    write_csv(a, c, recs);
    write_csv(b, c, run_suite(c));
    CHECK(a.str() == b.str());

    std::istringstream lines(a.str());
    std::string line;
    bool header_seen = false;
    while (std::getline(lines, line)) {
        if (line.rfind("# ", 0) == 0) continue;
        CHECK(line == "suite,criterion,check,statistic,lower,upper,pass,n,mean,variance,std_error,min,max");
        header_seen = true;
        break;
    }
    CHECK(header_seen);
    CHECK(a.str().find("# seed=20240611") != std::string::npos);
}

TEST_CASE("outputs land in RWSBI_OUTPUT_DIR") {
    const auto dir = scratch_dir("env");
    ::setenv("RWSBI_OUTPUT_DIR", dir.c_str(), 1);
    ExperimentConfig c;
    c.apply_environment();
    ::unsetenv("RWSBI_OUTPUT_DIR");
    CHECK(c.output_dir == dir.string());
    write_outputs(c, run_suite(c));
    CHECK(fs::exists(dir / "smoke.csv"));
    CHECK(fs::exists(dir / "smoke_replicas.csv"));
    CHECK(slurp(dir / "smoke_summary.txt").find("smoke") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("failed checks are reported, not hidden") {
    ExperimentConfig c;
    c.set("tol.smoke.runtime", "0");
    const auto recs = run_suite(c);
    CHECK_FALSE(all_pass(recs));
}

TEST_CASE("format_number round trips") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0})
        CHECK(std::stod(format_number(v)) == v);
    CHECK(format_number(0.5) == "0.5");
}
