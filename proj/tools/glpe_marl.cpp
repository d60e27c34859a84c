#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "glpe/checkpoint.hpp"
#include "glpe/config.hpp"
#include "glpe/error.hpp"
#include "glpe/gradcheck.hpp"
#include "glpe/layers.hpp"
#include "glpe/mixer.hpp"
#include "glpe/ops.hpp"
#include "glpe/pe_check.hpp"
#include "glpe/spread.hpp"
#include "glpe/toy.hpp"
#include "glpe/trainer.hpp"

namespace fs = std::filesystem;
using namespace glpe;

namespace {

constexpr const char* kVersion = "glpe-marl 0.1.0";

// Exit contract: 0 success, 1 verification or experiment failure, 2 usage or
// config error.
constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

void apply_thread_cap() {
#ifdef _OPENMP
    const char* env = std::getenv("GLPE_MARL_THREADS");
    if (!env || !*env) return;
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end || v < 1)
        throw ConfigError(std::string("GLPE_MARL_THREADS must be a positive integer, got '") +
                          env + "'");
    omp_set_num_threads(static_cast<int>(std::min<long>(v, omp_get_max_threads())));
#endif
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<long> split_longs(const std::string& s, const char* what) {
    std::vector<long> out;
    for (const auto& tok : split_csv(s)) {
        try {
            size_t pos = 0;
            long v = std::stol(tok, &pos);
            if (pos != tok.size() || v < 1) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError(std::string(what) + ": bad entry '" + tok + "'");
        }
    }
    if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
    return out;
}

std::vector<uint64_t> seed_list(long count) {
    if (count < 1) throw ConfigError("--seeds must be at least 1");
    std::vector<uint64_t> seeds;
    for (long s = 1; s <= count; ++s) seeds.push_back(static_cast<uint64_t>(s));
    return seeds;
}

void guard_overwrite(const fs::path& marker, bool force) {
    if (!force && fs::exists(marker))
        throw ConfigError("refusing to overwrite " + marker.string() +
                          " (rerun with --force)");
}

std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct ToyArgs {
    std::string modes = "mean,sum,max,mix";
    std::string agents = "5,10,20";
    long seeds = 3;
    long epochs = 300;
    long steps_per_epoch = 1;
    long batch_size = 32;
    long hidden = 64;
    long layers = 3;
    double lr = 1e-3;
    long d = 2;
    std::string out;
    bool force = false;
};

int cmd_toy(const ToyArgs& a) {
    ToyRunConfig cfg;
    cfg.epochs = a.epochs;
    cfg.steps_per_epoch = a.steps_per_epoch;
    cfg.batch_size = a.batch_size;
    cfg.hidden = a.hidden;
    cfg.n_layers = a.layers;
    cfg.lr = a.lr;
    cfg.d = a.d;
    cfg.seeds = a.seeds;
    cfg.agent_counts = split_longs(a.agents, "--agents");
    cfg.modes.clear();
    for (const auto& m : split_csv(a.modes)) cfg.modes.push_back(parse_toy_mode(m));
    if (cfg.modes.empty()) throw ConfigError("--modes: empty list");

    fs::create_directories(a.out);
    fs::path manifest_path = fs::path(a.out) / "manifest.txt";
    guard_overwrite(manifest_path, a.force);

    RunManifest manifest;
    manifest.kind = "toy";
    manifest.version = kVersion;
    manifest.out_dir = a.out;
    manifest.seeds = seed_list(a.seeds);
    std::string snap;
    snap += "toy.modes=" + a.modes + "\n";
    snap += "toy.agents=" + a.agents + "\n";
    snap += "toy.seeds=" + std::to_string(a.seeds) + "\n";
    snap += "toy.epochs=" + std::to_string(cfg.epochs) + "\n";
    snap += "toy.steps_per_epoch=" + std::to_string(cfg.steps_per_epoch) + "\n";
    snap += "toy.batch_size=" + std::to_string(cfg.batch_size) + "\n";
    snap += "toy.hidden=" + std::to_string(cfg.hidden) + "\n";
    snap += "toy.n_layers=" + std::to_string(cfg.n_layers) + "\n";
    snap += "toy.lr=" + fmt_g(cfg.lr) + "\n";
    snap += "toy.d=" + std::to_string(cfg.d) + "\n";
    manifest.config_text = snap;
    manifest.write(manifest_path.string());

    std::string csv = (fs::path(a.out) / "toy.csv").string();
    long diverged = run_toy_experiment(cfg, csv);
    long runs = static_cast<long>(cfg.modes.size() * cfg.agent_counts.size() *
                                  toy_variants().size()) *
                cfg.seeds;
    std::cout << "toy grid: " << runs << " runs, " << diverged << " diverged -> " << csv
              << "\n";
    return diverged == 0 ? kOk : kFail;
}

struct TrainArgs {
    std::string config;
    std::string policies = "distributed,glpe";
    std::string mixer = "qmix";
    long seeds = 3;
    std::string out;
    bool force = false;
};

int cmd_train(const TrainArgs& a) {
    if (!fs::exists(a.config))
        throw ConfigError("config file not found: " + a.config);
    KvConfig kv = KvConfig::parse_file(a.config);
    check_known_keys(kv);
    SpreadConfig env_cfg = spread_config_from(kv);
    TrainConfig train_cfg = train_config_from(kv);

    std::vector<PolicyKind> kinds;
    for (const auto& p : split_csv(a.policies)) kinds.push_back(parse_policy_kind(p));
    if (kinds.empty()) throw ConfigError("--policies: empty list");
    make_mixer(a.mixer, env_cfg.n_agents, env_cfg.state_dim());  // validates the name
    std::vector<uint64_t> seeds = seed_list(a.seeds);

    fs::create_directories(a.out);
    fs::path manifest_path = fs::path(a.out) / "manifest.txt";
    guard_overwrite(manifest_path, a.force);

    RunManifest manifest;
    manifest.kind = "train";
    manifest.version = kVersion;
    manifest.out_dir = a.out;
    manifest.seeds = seeds;
    manifest.config_text = snapshot_config(env_cfg, train_cfg).serialize() +
                           "run.policies=" + a.policies + "\nrun.mixer=" + a.mixer + "\n";
    manifest.write(manifest_path.string());

    struct RunRow {
        std::string policy;
        uint64_t seed;
        TrainRunResult result;
        bool failed = false;
        std::string error;
    };
    std::vector<RunRow> rows;
    for (PolicyKind kind : kinds) {
        for (uint64_t seed : seeds) {
            RunRow row;
            row.policy = to_string(kind);
            row.seed = seed;
            std::string run_dir = (fs::path(a.out) / (row.policy + "_" + a.mixer + "_seed" +
                                                      std::to_string(seed)))
                                      .string();
            fs::create_directories(run_dir);
            TrainConfig cfg = train_cfg;
            cfg.seed = seed;
            RunManifest rm = manifest;
            rm.kind = "train";
            rm.out_dir = run_dir;
            rm.seeds = {seed};
            rm.config_text = snapshot_config(env_cfg, cfg).serialize() +
                             "run.policy=" + row.policy + "\nrun.mixer=" + a.mixer + "\n";
            rm.write((fs::path(run_dir) / "manifest.txt").string());
            std::cout << "train " << row.policy << " mixer=" << a.mixer << " seed=" << seed
                      << " -> " << run_dir << std::endl;
            try {
                row.result = train_run(cfg, env_cfg, kind, a.mixer, run_dir);
                std::cout << "  final=" << row.result.final_eval_mean
                          << " baseline=" << row.result.baseline_mean
                          << " diverged=" << (row.result.diverged ? "yes" : "no")
                          << " env_steps=" << row.result.env_steps << " ("
                          << row.result.seconds << "s)" << std::endl;
            } catch (const std::exception& e) {
                row.failed = true;
                row.error = e.what();
                std::cout << "  FAILED: " << row.error << std::endl;
            }
            rows.push_back(std::move(row));
        }
    }

    std::ofstream summary(fs::path(a.out) / "summary.csv", std::ios::trunc);
    summary << "policy,mixer,seed,final_mean_return,final_std_return,baseline_mean_return,"
               "diverged,env_steps,train_steps\n";
    for (const auto& r : rows) {
        if (r.failed) continue;
        summary << r.policy << ',' << a.mixer << ',' << r.seed << ','
                << fmt_g(r.result.final_eval_mean) << ',' << fmt_g(r.result.final_eval_std)
                << ',' << fmt_g(r.result.baseline_mean) << ',' << (r.result.diverged ? 1 : 0)
                << ',' << r.result.env_steps << ',' << r.result.train_steps << '\n';
    }
    summary.close();

    bool any_bad = false;
    for (PolicyKind kind : kinds) {
        std::vector<std::string> metric_files;
        for (const auto& r : rows)
            if (!r.failed && r.policy == to_string(kind))
                metric_files.push_back(r.result.metrics_path);
        if (metric_files.empty()) {
            any_bad = true;
            continue;
        }
        auto agg = aggregate_runs(metric_files);
        std::string agg_path =
            (fs::path(a.out) / (to_string(kind) + "_" + a.mixer + "_aggregate.csv")).string();
        write_aggregate_csv(agg_path, agg);
        std::cout << "aggregate " << to_string(kind) << " -> " << agg_path << "\n";
    }
    for (const auto& r : rows)
        if (r.failed || r.result.diverged) any_bad = true;
    return any_bad ? kFail : kOk;
}

struct EvalArgs {
    std::string checkpoint;
    std::string config;
    std::string policy = "glpe";
    long hidden = 64;
    long episodes = 20;
    uint64_t seed = 1;
    std::string trace;
};

int cmd_eval(const EvalArgs& a) {
    SpreadConfig env_cfg;
    if (!a.config.empty()) {
        KvConfig kv = KvConfig::parse_file(a.config);
        env_cfg = spread_config_from(kv);
    }
    PolicyKind kind = parse_policy_kind(a.policy);
    EvalStats stats =
        evaluate_checkpoint(a.checkpoint, env_cfg, kind, a.hidden, a.episodes, a.seed);
    std::cout << "episodes=" << a.episodes << " mean_return=" << stats.mean_return
              << " std_return=" << stats.std_return << "\n";

    if (!a.trace.empty()) {
        GlpeNetwork policy = make_policy(kind, policy_feat_dim(env_cfg), kSpreadActions,
                                         a.hidden);
        checkpoint::load_into(a.checkpoint + "_policy", policy.named_parameters());
        Rng rng(a.seed);
        SpreadEnv env(env_cfg, rng.derive(1));
        std::ofstream out(a.trace, std::ios::trunc);
        if (!out) throw ConfigError("cannot write trace file: " + a.trace);
        out << "t,agent,pos_x,pos_y,action,reward\n";
        Tensor obs = env.reset();
        auto hiddens = policy.initial_hidden(1, env_cfg.n_agents);
        std::vector<long> last(env_cfg.n_agents, -1);
        std::vector<double> avail(
            static_cast<size_t>(env_cfg.n_agents * kSpreadActions), 1.0);
        Rng pick(a.seed);
        for (long t = 0; t < env_cfg.episode_length; ++t) {
            std::vector<double> rows = assemble_feats(obs, last, kSpreadActions);
            Tensor feats({env_cfg.n_agents, policy_feat_dim(env_cfg)}, std::move(rows));
            std::vector<long> actions =
                select_actions(policy, feats, hiddens, avail, 0.0, pick);
            SpreadStep step = env.step(actions);
            const SpreadState& s = env.state();
            for (long i = 0; i < env_cfg.n_agents; ++i) {
                out << t << ',' << i << ',' << fmt_g(s.agent_pos[static_cast<size_t>(2 * i)])
                    << ',' << fmt_g(s.agent_pos[static_cast<size_t>(2 * i + 1)]) << ','
                    << actions[static_cast<size_t>(i)] << ',' << fmt_g(step.reward) << '\n';
            }
            obs = step.obs;
            last = actions;
            if (step.done) break;
        }
        std::cout << "trace -> " << a.trace << "\n";
    }
    return kOk;
}

struct VerifyArgs {
    long trials = 100;
    long instances = 20;
    uint64_t seed = 7;
    bool negative_control = false;
};

int cmd_verify(const VerifyArgs& a) {
    bool all_pass = true;
    Rng rng(a.seed);
    std::printf("%-12s %-26s %8s %12s  %s\n", "suite", "case", "checks", "max_dev",
                "status");

    const long feat = 21;  // Spread-4 per-agent feature width
    for (long n : {2L, 5L, 8L}) {
        GlpeNetwork net = make_cpe_policy(feat, kSpreadActions, 64);
        Rng init = rng.derive(100 + static_cast<uint64_t>(n));
        net.init(init);
        Rng pe = rng.derive(200 + static_cast<uint64_t>(n));
        PeReport rep = assert_permutation_equivariant(joint_fn(net), n, feat, a.trials,
                                                      1e-9, pe);
        all_pass = all_pass && rep.passed;
        std::printf("%-12s %-26s %8ld %12.3e  %s\n", "perm-check",
                    ("cpe policy N=" + std::to_string(n)).c_str(), rep.trials,
                    rep.max_deviation, rep.passed ? "PASS" : "FAIL");
    }
    if (a.negative_control) {
        for (long n : {2L, 5L, 8L}) {
            PlainMlp mlp = make_toy_mlp(n, feat, 64, 3);
            Rng init = rng.derive(300 + static_cast<uint64_t>(n));
            mlp.init(init);
            Rng pe = rng.derive(400 + static_cast<uint64_t>(n));
            PeReport rep = assert_permutation_equivariant(joint_fn(mlp, n), n, feat,
                                                          a.trials, 1e-9, pe);
            bool failed_as_designed = !rep.passed;
            all_pass = all_pass && failed_as_designed;
            std::printf("%-12s %-26s %8ld %12.3e  %s\n", "perm-check",
                        ("mlp control N=" + std::to_string(n)).c_str(), rep.trials,
                        rep.max_deviation,
                        failed_as_designed ? "FAIL (as designed)" : "unexpected PASS");
        }
    }

    Rng grad_rng = rng.derive(500);
    for (const auto& rep : grad_check_all(grad_rng, a.instances)) {
        all_pass = all_pass && rep.passed;
        std::printf("%-12s %-26s %8ld %12.3e  %s\n", "grad-check", rep.name.c_str(),
                    rep.checks, std::max(rep.max_rel, rep.max_abs),
                    rep.passed ? "PASS" : "FAIL");
    }

    for (long n : {3L, 4L, 5L, 8L}) {
        SpreadConfig env;
        env.n_agents = n;
        GlpeNetwork glpe_net = make_cpe_policy(policy_feat_dim(env), kSpreadActions, 64);
        GlpeNetwork twin = distributed_twin(glpe_net);
        bool ok = check_size_bound(glpe_net, twin);
        double ratio = static_cast<double>(glpe_net.param_count()) /
                       static_cast<double>(twin.param_count());
        all_pass = all_pass && ok;
        char label[64];
        std::snprintf(label, sizeof(label), "spread-%ld %ld/%ld", n, glpe_net.param_count(),
                      twin.param_count());
        std::printf("%-12s %-26s %8s %12.3f  %s\n", "param-count", label, "ratio", ratio,
                    ok ? "PASS" : "FAIL");
    }
    {
        GlpeNetwork toy_net = make_toy_pe_network(2, Pool::Mean, Act::Tanh, 64, 3);
        GlpeNetwork twin = distributed_twin(toy_net);
        bool ok = check_size_bound(toy_net, twin);
        double ratio = static_cast<double>(toy_net.param_count()) /
                       static_cast<double>(twin.param_count());
        all_pass = all_pass && ok;
        char label[64];
        std::snprintf(label, sizeof(label), "toy pe d=2 %ld/%ld", toy_net.param_count(),
                      twin.param_count());
        std::printf("%-12s %-26s %8s %12.3f  %s\n", "param-count", label, "ratio", ratio,
                    ok ? "PASS" : "FAIL");
    }
    {
        // Same per-agent width, different agent counts: identical counts.
        GlpeNetwork net = make_cpe_policy(feat, kSpreadActions, 64);
        Rng init = rng.derive(600);
        net.init(init);
        long before = net.param_count();
        bool ok = true;
        for (long n : {2L, 5L, 8L}) {
            NoGradGuard ng;
            auto h = net.initial_hidden(1, n);
            Tensor x({1, n, feat}, 0.25);
            net.forward(x, &h);
            ok = ok && net.param_count() == before;
        }
        all_pass = all_pass && ok;
        std::printf("%-12s %-26s %8s %12ld  %s\n", "param-count", "N-invariance (fixed F)",
                    "count", before, ok ? "PASS" : "FAIL");
    }

    std::printf("verify: %s\n", all_pass ? "ALL PASS" : "FAILURES");
    return all_pass ? kOk : kFail;
}

struct AggregateArgs {
    std::vector<std::string> inputs;
    std::string out;
};

int cmd_aggregate(const AggregateArgs& a) {
    std::vector<std::string> files;
    for (const auto& in : a.inputs) {
        if (fs::is_directory(in))
            files.push_back((fs::path(in) / "metrics.csv").string());
        else
            files.push_back(in);
    }
    auto rows = aggregate_runs(files);
    write_aggregate_csv(a.out, rows);
    std::cout << "aggregate of " << files.size() << " runs -> " << a.out << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Global-local permutation equivariant networks: verification suites and "
                 "experiments"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    ToyArgs toy_args;
    auto* toy = app.add_subcommand("toy", "Run the statistic-regression benchmark grid");
    toy->add_option("--modes", toy_args.modes, "Comma list of mean,sum,max,mix")
        ->capture_default_str();
    toy->add_option("--agents", toy_args.agents, "Comma list of agent counts")
        ->capture_default_str();
    toy->add_option("--seeds", toy_args.seeds, "Number of seeds (1..k)")
        ->capture_default_str();
    toy->add_option("--epochs", toy_args.epochs, "Training epochs")->capture_default_str();
    toy->add_option("--steps-per-epoch", toy_args.steps_per_epoch,
                    "Gradient steps per epoch")
        ->capture_default_str();
    toy->add_option("--batch", toy_args.batch_size, "Joint inputs per step")
        ->capture_default_str();
    toy->add_option("--hidden", toy_args.hidden, "Hidden width")->capture_default_str();
    toy->add_option("--layers", toy_args.layers, "Layer count")->capture_default_str();
    toy->add_option("--lr", toy_args.lr, "Adam learning rate")->capture_default_str();
    toy->add_option("--d", toy_args.d, "Per-agent feature width")->capture_default_str();
    toy->add_option("--out", toy_args.out, "Output directory")->required();
    toy->add_flag("--force", toy_args.force, "Overwrite an existing run directory");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train policies on the Spread environment");
    train->add_option("--config", train_args.config, "key=value config file")->required();
    train->add_option("--policies", train_args.policies,
                      "Comma list of distributed,glpe")
        ->capture_default_str();
    train->add_option("--mixer", train_args.mixer, "vdn or qmix")->capture_default_str();
    train->add_option("--seeds", train_args.seeds, "Number of seeds (1..k)")
        ->capture_default_str();
    train->add_option("--out", train_args.out, "Output directory")->required();
    train->add_flag("--force", train_args.force, "Overwrite an existing run directory");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Greedy rollouts from a saved checkpoint");
    eval->add_option("--checkpoint", eval_args.checkpoint,
                     "Checkpoint stem (files <stem>_policy.{manifest,bin})")
        ->required();
    eval->add_option("--config", eval_args.config, "key=value config file (env section)");
    eval->add_option("--policy", eval_args.policy, "distributed or glpe")
        ->capture_default_str();
    eval->add_option("--hidden", eval_args.hidden, "Hidden width used at training time")
        ->capture_default_str();
    eval->add_option("--episodes", eval_args.episodes, "Evaluation episodes")
        ->capture_default_str();
    eval->add_option("--seed", eval_args.seed, "Evaluation seed")->capture_default_str();
    eval->add_option("--trace", eval_args.trace,
                     "Write one episode as CSV (t,agent,pos_x,pos_y,action,reward)");

    VerifyArgs verify_args;
    auto* verify = app.add_subcommand(
        "verify", "Permutation-equivariance, gradient, and parameter-count suites");
    verify->add_option("--trials", verify_args.trials, "Input/permutation pairs per case")
        ->capture_default_str();
    verify->add_option("--instances", verify_args.instances,
                       "Random instances per gradient case")
        ->capture_default_str();
    verify->add_option("--seed", verify_args.seed, "Suite seed")->capture_default_str();
    verify->add_flag("--negative-control", verify_args.negative_control,
                     "Include the plain-MLP check that must fail");

    AggregateArgs agg_args;
    auto* agg = app.add_subcommand(
        "aggregate",
        "Merge metrics.csv files over seeds. Quantiles use the linear-interpolation rule: "
        "at rank h=(n-1)p the value is v[floor(h)] + frac(h)*(v[floor(h)+1]-v[floor(h)]).");
    agg->add_option("inputs", agg_args.inputs, "metrics.csv files or run directories")
        ->required();
    agg->add_option("--out", agg_args.out, "Output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        apply_thread_cap();
        if (app.got_subcommand(toy)) return cmd_toy(toy_args);
        if (app.got_subcommand(train)) return cmd_train(train_args);
        if (app.got_subcommand(eval)) return cmd_eval(eval_args);
        if (app.got_subcommand(verify)) return cmd_verify(verify_args);
        if (app.got_subcommand(agg)) return cmd_aggregate(agg_args);
        std::cerr << "no subcommand\n";
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const DimensionError& e) {
        std::cerr << "dimension error: " << e.what() << "\n";
        return kUsage;
    } catch (const StateError& e) {
        std::cerr << "state error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFail;
    }
}
