#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rwsbi/particles.hpp"
#include "rwsbi/stats.hpp"

namespace rwsbi {

/// Flat `key = value` configuration. Unset optional fields fall back to the
/// suite's own defaults.
struct ExperimentConfig {
    std::string suite = "smoke";
    std::string kernel = "ssrw";
    double gamma = 1.0;
    double alpha = 1.0;
    double epsilon = 0.5;
    Sign sign = Sign::Plus;
    std::optional<double> t_max;
    std::optional<std::size_t> n_max;
    std::optional<std::size_t> replicas;
    std::uint64_t seed = 20240611;
    std::string output_dir = ".";
    std::map<std::string, double> tolerances;  // overrides of default_tolerances()

    /// Throws ConfigError on unknown keys or unparsable values. Keys are the
    /// field names; `tol.<name>` sets a tolerance override.
    void set(const std::string& key, const std::string& value);
    static ExperimentConfig parse(std::istream& in);
    static ExperimentConfig load(const std::string& path);
    /// RWSBI_OUTPUT_DIR, when set, replaces output_dir.
    void apply_environment();
    /// Throws ConfigError when a range or file reference is invalid.
    void validate() const;
    /// Every field as (key, value) in a fixed order, for output headers.
    std::vector<std::pair<std::string, std::string>> entries() const;
    double tolerance(const std::string& name) const;
};

struct ToleranceEntry {
    double value = 0.0;
    const char* provenance = "";
};
/// Versioned pass/fail thresholds.
const std::map<std::string, ToleranceEntry>& default_tolerances();
inline constexpr const char* kToleranceTableVersion = "2";

/// One check of a suite: statistic compared with [lower, upper].
struct ResultRecord {
    std::string suite;
    std::string criterion;
    std::string check;
    std::vector<std::pair<std::string, std::string>> parameters;
    std::vector<double> values;  // per-replica values, may be empty
    std::optional<Aggregate> aggregate;
    double statistic = 0.0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    bool pass = false;
    /// The statistic is a wall-clock measurement; left out of the CSV.
    bool timing = false;
    double wall_seconds = 0.0;
};

std::vector<std::string> available_suites();

/// Runs a suite. Module errors are rethrown with the suite name prefixed.
std::vector<ResultRecord> run_suite(const ExperimentConfig& config);

bool all_pass(const std::vector<ResultRecord>& records);

/// Header lines `# key=value`, then
/// suite,criterion,check,statistic,lower,upper,pass,n,mean,variance,std_error,min,max
/// Timing rows leave the statistic blank so reruns are byte-identical.
void write_csv(std::ostream& out, const ExperimentConfig& config, const std::vector<ResultRecord>& records);
/// criterion,check,replica,value
void write_replica_csv(std::ostream& out, const ExperimentConfig& config, const std::vector<ResultRecord>& records);
void write_summary(std::ostream& out, const std::vector<ResultRecord>& records);

/// Writes <output_dir>/<suite>.csv, <suite>_replicas.csv and <suite>_summary.txt.
void write_outputs(const ExperimentConfig& config, const std::vector<ResultRecord>& records);

/// Shortest round-trip decimal representation, locale independent.
std::string format_number(double v);

}  // namespace rwsbi
