#include "glpe/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "glpe/error.hpp"

namespace glpe {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string fmt_long(long v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%ld", v);
    return buf;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const char* const kEnvKeys[] = {
    "env.n_agents",     "env.episode_length", "env.dt",          "env.damping",
    "env.force_mag",    "env.agent_radius",   "env.spawn_range", "env.collision_penalty",
};

const char* const kTrainKeys[] = {
    "train.total_steps", "train.batch_size",     "train.lr",
    "train.gamma",       "train.eps_start",      "train.eps_end",
    "train.eps_anneal_steps", "train.target_update_interval",
    "train.eval_every",  "train.eval_episodes",  "train.buffer_capacity",
    "train.grad_clip",   "train.hidden",         "train.seed",
};

bool known_env_key(const std::string& k) {
    for (const char* s : kEnvKeys)
        if (k == s) return true;
    return false;
}

bool known_train_key(const std::string& k) {
    for (const char* s : kTrainKeys)
        if (k == s) return true;
    return false;
}

}  // namespace

KvConfig KvConfig::parse_string(const std::string& text) {
    KvConfig kv;
    std::istringstream in(text);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + fmt_long(lineno) + " has no '=': " + t);
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + fmt_long(lineno) + " has an empty key");
        kv.set(key, value);
    }
    return kv;
}

KvConfig KvConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
}

std::string KvConfig::serialize() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

bool KvConfig::has(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return true;
    return false;
}

const std::string& KvConfig::get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return v;
    throw ConfigError("missing config key '" + key + "'");
}

void KvConfig::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    entries_.emplace_back(key, value);
}

long KvConfig::get_long(const std::string& key, long fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = get(key);
    try {
        size_t pos = 0;
        long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' is not an integer: " + s);
    }
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = get(key);
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' is not a number: " + s);
    }
}

SpreadConfig spread_config_from(const KvConfig& kv) {
    for (const auto& [k, v] : kv.entries()) {
        if (k.rfind("env.", 0) == 0 && !known_env_key(k))
            throw ConfigError("unknown config key '" + k + "'");
    }
    SpreadConfig cfg;
    cfg.n_agents = kv.get_long("env.n_agents", cfg.n_agents);
    cfg.episode_length = kv.get_long("env.episode_length", cfg.episode_length);
    cfg.dt = kv.get_double("env.dt", cfg.dt);
    cfg.damping = kv.get_double("env.damping", cfg.damping);
    cfg.force_mag = kv.get_double("env.force_mag", cfg.force_mag);
    cfg.agent_radius = kv.get_double("env.agent_radius", cfg.agent_radius);
    cfg.spawn_range = kv.get_double("env.spawn_range", cfg.spawn_range);
    cfg.collision_penalty = kv.get_double("env.collision_penalty", cfg.collision_penalty);
    cfg.validate();
    return cfg;
}

TrainConfig train_config_from(const KvConfig& kv) {
    for (const auto& [k, v] : kv.entries()) {
        if (k.rfind("train.", 0) == 0 && !known_train_key(k))
            throw ConfigError("unknown config key '" + k + "'");
    }
    TrainConfig cfg;
    cfg.total_steps = kv.get_long("train.total_steps", cfg.total_steps);
    cfg.batch_size = kv.get_long("train.batch_size", cfg.batch_size);
    cfg.lr = kv.get_double("train.lr", cfg.lr);
    cfg.gamma = kv.get_double("train.gamma", cfg.gamma);
    cfg.eps_start = kv.get_double("train.eps_start", cfg.eps_start);
    cfg.eps_end = kv.get_double("train.eps_end", cfg.eps_end);
    cfg.eps_anneal_steps = kv.get_long("train.eps_anneal_steps", cfg.eps_anneal_steps);
    cfg.target_update_interval =
        kv.get_long("train.target_update_interval", cfg.target_update_interval);
    cfg.eval_every = kv.get_long("train.eval_every", cfg.eval_every);
    cfg.eval_episodes = kv.get_long("train.eval_episodes", cfg.eval_episodes);
    cfg.buffer_capacity = kv.get_long("train.buffer_capacity", cfg.buffer_capacity);
    cfg.grad_clip = kv.get_double("train.grad_clip", cfg.grad_clip);
    cfg.hidden = kv.get_long("train.hidden", cfg.hidden);
    cfg.seed = static_cast<uint64_t>(kv.get_long("train.seed", static_cast<long>(cfg.seed)));
    cfg.validate();
    return cfg;
}

void check_known_keys(const KvConfig& kv) {
    for (const auto& [k, v] : kv.entries()) {
        if (!known_env_key(k) && !known_train_key(k))
            throw ConfigError("unknown config key '" + k + "'");
    }
}

KvConfig snapshot_config(const SpreadConfig& env, const TrainConfig& train) {
    KvConfig kv;
    kv.set("env.n_agents", fmt_long(env.n_agents));
    kv.set("env.episode_length", fmt_long(env.episode_length));
    kv.set("env.dt", fmt_double(env.dt));
    kv.set("env.damping", fmt_double(env.damping));
    kv.set("env.force_mag", fmt_double(env.force_mag));
    kv.set("env.agent_radius", fmt_double(env.agent_radius));
    kv.set("env.spawn_range", fmt_double(env.spawn_range));
    kv.set("env.collision_penalty", fmt_double(env.collision_penalty));
    kv.set("train.total_steps", fmt_long(train.total_steps));
    kv.set("train.batch_size", fmt_long(train.batch_size));
    kv.set("train.lr", fmt_double(train.lr));
    kv.set("train.gamma", fmt_double(train.gamma));
    kv.set("train.eps_start", fmt_double(train.eps_start));
    kv.set("train.eps_end", fmt_double(train.eps_end));
    kv.set("train.eps_anneal_steps", fmt_long(train.eps_anneal_steps));
    kv.set("train.target_update_interval", fmt_long(train.target_update_interval));
    kv.set("train.eval_every", fmt_long(train.eval_every));
    kv.set("train.eval_episodes", fmt_long(train.eval_episodes));
    kv.set("train.buffer_capacity", fmt_long(train.buffer_capacity));
    kv.set("train.grad_clip", fmt_double(train.grad_clip));
    kv.set("train.hidden", fmt_long(train.hidden));
    kv.set("train.seed", fmt_long(static_cast<long>(train.seed)));
    return kv;
}

void RunManifest::write(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write manifest: " + path);
    out << "glpe-run v1\n";
    out << "kind=" << kind << "\n";
    out << "version=" << version << "\n";
    out << "out_dir=" << out_dir << "\n";
    out << "seeds=";
    for (size_t i = 0; i < seeds.size(); ++i) {
        if (i) out << ',';
        out << seeds[i];
    }
    out << "\n";
    out << "config:\n";
    out << config_text;
    if (!config_text.empty() && config_text.back() != '\n') out << '\n';
    out.flush();
    if (!out) throw ConfigError("failed writing manifest: " + path);
}

double quantile_linear(const std::vector<double>& sorted_values, double p) {
    if (sorted_values.empty()) throw DimensionError("quantile of empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("quantile p outside [0,1]");
    size_t n = sorted_values.size();
    double h = static_cast<double>(n - 1) * p;
    size_t lo = static_cast<size_t>(h);
    if (lo + 1 >= n) return sorted_values[n - 1];
    double frac = h - static_cast<double>(lo);
    return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo]);
}

namespace {

struct MetricsSeries {
    std::vector<long> steps;
    std::vector<double> means;
};

MetricsSeries read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open metrics file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty metrics file: " + path);
    if (trim(line) != "seed,env_steps,mean_test_return,std_test_return,epsilon,loss")
        throw ConfigError("unexpected metrics header in " + path + ": " + line);
    MetricsSeries series;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<std::string> cols;
        std::string cell;
        std::istringstream row(line);
        while (std::getline(row, cell, ',')) cols.push_back(cell);
        if (cols.size() != 6)
            throw ConfigError(path + " line " + fmt_long(lineno) + ": expected 6 columns");
        try {
            series.steps.push_back(std::stol(cols[1]));
            series.means.push_back(std::stod(cols[2]));
        } catch (const std::exception&) {
            throw ConfigError(path + " line " + fmt_long(lineno) + ": bad number");
        }
    }
    if (series.steps.empty()) throw ConfigError("no data rows in " + path);
    return series;
}

}  // namespace

std::vector<AggregateRow> aggregate_runs(const std::vector<std::string>& metric_csvs) {
    if (metric_csvs.empty()) throw ConfigError("no metrics files to aggregate");
    std::vector<MetricsSeries> all;
    all.reserve(metric_csvs.size());
    for (const auto& path : metric_csvs) all.push_back(read_metrics_csv(path));
    for (size_t i = 1; i < all.size(); ++i) {
        if (all[i].steps != all[0].steps)
            throw ConfigError("env_steps grids differ between " + metric_csvs[0] + " and " +
                              metric_csvs[i]);
    }
    std::vector<AggregateRow> rows;
    rows.reserve(all[0].steps.size());
    for (size_t r = 0; r < all[0].steps.size(); ++r) {
        std::vector<double> vals;
        vals.reserve(all.size());
        for (const auto& s : all) vals.push_back(s.means[r]);
        std::sort(vals.begin(), vals.end());
        AggregateRow row;
        row.env_steps = all[0].steps[r];
        double sum = 0;
        for (double v : vals) sum += v;
        row.mean = sum / static_cast<double>(vals.size());
        row.min = vals.front();
        row.max = vals.back();
        row.q125 = quantile_linear(vals, 0.125);
        row.q875 = quantile_linear(vals, 0.875);
        rows.push_back(row);
    }
    return rows;
}

void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write aggregate file: " + path);
    out << "env_steps,mean,min,max,q12.5,q87.5\n";
    for (const auto& r : rows) {
        out << r.env_steps << ',' << fmt_double(r.mean) << ',' << fmt_double(r.min) << ','
            << fmt_double(r.max) << ',' << fmt_double(r.q125) << ',' << fmt_double(r.q875)
            << '\n';
    }
    out.flush();
    if (!out) throw ConfigError("failed writing aggregate file: " + path);
}

}  // namespace glpe
