#pragma once

#include <string>
#include <utility>
#include <vector>

#include "glpe/spread.hpp"
#include "glpe/trainer.hpp"

namespace glpe {

// Flat key=value config text with section prefixes (env.n_agents, train.lr).
// '#' starts a comment; blank lines ignored. Keys keep insertion order so
// parse -> serialize -> parse is the identity on the mapping.
class KvConfig {
  public:
    static KvConfig parse_string(const std::string& text);
    static KvConfig parse_file(const std::string& path);
    std::string serialize() const;

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    void set(const std::string& key, const std::string& value);

    long get_long(const std::string& key, long fallback) const;
    double get_double(const std::string& key, double fallback) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const {
        return entries_;
    }
    bool operator==(const KvConfig& other) const { return entries_ == other.entries_; }

  private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

// Builders reject unknown keys in their section by name.
SpreadConfig spread_config_from(const KvConfig& kv);
TrainConfig train_config_from(const KvConfig& kv);
// Rejects any key outside the known env.* / train.* set.
void check_known_keys(const KvConfig& kv);
// Full resolved snapshot of both sections.
KvConfig snapshot_config(const SpreadConfig& env, const TrainConfig& train);

struct RunManifest {
    std::string kind;  // toy | train | eval | perm-check | param-count | grad-check
    std::string config_text;
    std::vector<uint64_t> seeds;
    std::string out_dir;
    std::string version;

    void write(const std::string& path) const;
};

// Linear-interpolation quantile at rank h = (n-1)*p over sorted values.
double quantile_linear(const std::vector<double>& sorted_values, double p);

struct AggregateRow {
    long env_steps = 0;
    double mean = 0, min = 0, max = 0, q125 = 0, q875 = 0;
};

// Seed aggregation of metrics.csv files; all files must share the same
// env_steps grid.
std::vector<AggregateRow> aggregate_runs(const std::vector<std::string>& metric_csvs);
void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows);

}  // namespace glpe
