#include "qmdpnet/cli.hpp"

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "qmdpnet/dataset.hpp"
#include "qmdpnet/errors.hpp"
#include "qmdpnet/evalviz.hpp"
#include "qmdpnet/net.hpp"
#include "qmdpnet/pomdp_file.hpp"
#include "qmdpnet/train.hpp"

namespace qmdpnet {

using nlohmann::json;

namespace {

// Flat key set per command; flags mirror config-file keys one-to-one and
// override them. Every key has a default except the path-like ones.
struct OptSpec {
    std::string key;
    char type;  // 'b' bool, 'i' int, 'u' u64, 'd' double, 's' string
    std::string def;
    std::string help;
};

class Args {
public:
    Args(std::string command, std::vector<OptSpec> specs) : command_(std::move(command)) {
        for (OptSpec& s : specs) specs_[s.key] = s;
    }

    // returns false when --help was printed
    bool parse(const std::vector<std::string>& argv) {
        for (const auto& kv : specs_) values_[kv.first] = parse_value(kv.second, kv.second.def);

        // config file first, then flag overrides
        for (const std::string& t : argv) {
            if (t == "--help") {
                print_help();
                return false;
            }
        }
        for (std::size_t i = 0; i < argv.size(); ++i) {
            if (argv[i] == "--config") {
                if (i + 1 >= argv.size()) throw ConfigError("--config requires a path");
                apply_config(argv[i + 1]);
            }
        }
        for (std::size_t i = 0; i < argv.size();) {
            const std::string& flag = argv[i];
            if (flag == "--config") {
                i += 2;
                continue;
            }
            if (flag.rfind("--", 0) != 0) throw ConfigError("expected a --flag, got '" + flag + "'");
            const std::string key = flag.substr(2);
            auto it = specs_.find(key);
            if (it == specs_.end()) throw ConfigError("unknown option --" + key);
            if (i + 1 >= argv.size()) throw ConfigError("--" + key + " requires a value");
            values_[key] = parse_value(it->second, argv[i + 1]);
            i += 2;
        }
        return true;
    }

    bool b(const std::string& k) const { return values_.at(k).get<bool>(); }
    int i(const std::string& k) const { return values_.at(k).get<int>(); }
    std::uint64_t u(const std::string& k) const { return values_.at(k).get<std::uint64_t>(); }
    double d(const std::string& k) const { return values_.at(k).get<double>(); }
    std::string s(const std::string& k) const { return values_.at(k).get<std::string>(); }

    std::string require_path(const std::string& k) const {
        std::string v = s(k);
        if (v.empty()) throw ConfigError("--" + k + " is required");
        return v;
    }

    json echo() const {
        json j;
        for (const auto& kv : values_) j[kv.first] = kv.second;
        return j;
    }

    void print_help() const {
        std::cerr << "usage: qmdpnet " << command_ << " [--config file.json] [--key value ...]\n";
        for (const auto& kv : specs_) {
            std::cerr << "  --" << kv.first;
            if (!kv.second.def.empty() || kv.second.type != 's')
                std::cerr << " (default: " << (kv.second.def.empty() ? "\"\"" : kv.second.def)
                          << ")";
            else
                std::cerr << " (required)";
            std::cerr << "  " << kv.second.help << "\n";
        }
    }

private:
    json parse_value(const OptSpec& spec, const std::string& text) const {
        try {
            switch (spec.type) {
                case 'b':
                    if (text == "true" || text == "1") return true;
                    if (text == "false" || text == "0" || text.empty()) return false;
                    throw ConfigError("boolean --" + spec.key + " must be true/false");
                case 'i': return std::stoi(text);
                case 'u': return static_cast<std::uint64_t>(std::stoull(text.empty() ? "0" : text));
                case 'd': return std::stod(text);
                default: return text;
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("bad value for --" + spec.key + ": '" + text + "'");
        }
    }

    void apply_config(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot open config file: " + path);
        json j;
        try {
            j = json::parse(in);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
        for (auto it = j.begin(); it != j.end(); ++it) {
            auto spec = specs_.find(it.key());
            if (spec == specs_.end()) throw ConfigError("unknown config key '" + it.key() + "'");
            values_[it.key()] = it.value();
        }
    }

    std::string command_;
    std::map<std::string, OptSpec> specs_;
    std::map<std::string, json> values_;
};

DomainConfig domain_config_from(const Args& a) {
    DomainConfig c;
    c.kind = domain_kind_from_name(a.s("domain"));
    c.variant = variant_from_name(a.s("variant"));
    c.n = a.i("n");
    c.p_obstacle = a.d("p-obstacle");
    c.fixed_env = a.b("fixed");
    c.hallway2_pomdp = a.s("hallway2-pomdp");
    if (!a.s("objects").empty()) {
        std::stringstream ss(a.s("objects"));
        std::string tok;
        while (std::getline(ss, tok, ',')) c.objects.push_back(std::stoi(tok));
    }
    return c;
}

std::vector<OptSpec> domain_opts() {
    return {
        {"domain", 's', "grid", "grid | maze | grasp | hallway2grid"},
        {"variant", 's', "det", "det | stoch"},
        {"n", 'i', "10", "board size (odd for mazes)"},
        {"p-obstacle", 'd', "0.25", "obstacle probability for grid boards"},
        {"fixed", 'b', "false", "single fixed environment"},
        {"objects", 's', "", "grasp object ids, comma separated (default: training split)"},
        {"hallway2-pomdp", 's', "data/hallway2.pomdp", "canonical model for hallway2grid"},
    };
}

int cmd_gen(const std::vector<std::string>& argv) {
    std::vector<OptSpec> opts = domain_opts();
    opts.push_back({"envs", 'i', "100", "number of environments"});
    opts.push_back({"trajs", 'i', "5", "expert trajectories per environment"});
    opts.push_back({"seed", 'u', "0", "master seed"});
    opts.push_back({"keep-failures", 'b', "false", "retain failed trajectories (test sets)"});
    opts.push_back({"threads", 'i', "1", "worker threads"});
    opts.push_back({"out", 's', "", "output dataset directory"});
    Args a("gen", opts);
    if (!a.parse(argv)) return 0;

    DomainConfig config = domain_config_from(a);
    Dataset ds = generate_expert_data(config, a.i("envs"), a.i("trajs"), a.u("seed"),
                                      a.b("keep-failures"), a.i("threads"));
    save_dataset(ds, a.require_path("out"));
    json out;
    out["env_count"] = ds.manifest.env_count;
    out["traj_count"] = ds.manifest.traj_count;
    out["expert_attempts"] = ds.manifest.expert_attempts;
    out["expert_success_fraction"] = ds.expert_success_rate();
    out["dataset_checksum"] = dataset_checksum(ds);
    out["out"] = a.s("out");
    std::cout << out.dump(2) << std::endl;
    return 0;
}

int cmd_train(const std::vector<std::string>& argv) {
    std::vector<OptSpec> opts = {
        {"data", 's', "", "training dataset directory"},
        {"out", 's', "", "output model directory"},
        {"k", 'i', "0", "planner iterations (0 = domain preset)"},
        {"net-variant", 's', "tied", "tied | untied"},
        {"lr", 'd', "0", "learning rate (0 = 1e-3 tied, 1e-4 untied)"},
        {"batch", 'i', "100", "mini-batch size in trajectories"},
        {"window", 'i', "4", "backpropagation window (steps)"},
        {"l1", 'i', "4", "round-1 step limit"},
        {"l2", 'i', "100", "round-2 step limit"},
        {"patience", 'i', "30", "epochs without improvement before lr decay"},
        {"lr-decay", 'd', "0.9", "learning-rate decay factor"},
        {"decays", 'i', "15", "decay iterations before stopping"},
        {"val-fraction", 'd', "0.1", "validation fraction of the training data"},
        {"max-epochs", 'i', "100000", "hard epoch cap"},
        {"grad-clip", 'd', "0", "global-norm gradient clip (0 = off)"},
        {"seed", 'u', "0", "training seed"},
        {"threads", 'i', "1", "worker threads"},
        {"fixed", 'b', "false", "force single-round fixed-environment schedule"},
    };
    Args a("train", opts);
    if (!a.parse(argv)) return 0;

    Dataset ds = load_dataset(a.require_path("data"));
    if (ds.envs.empty()) throw ConfigError("train: dataset has no environments");
    NetVariant variant =
        a.s("net-variant") == "untied" ? NetVariant::kUntied : NetVariant::kTied;
    NetConfig net_config = NetConfig::for_domain(ds.manifest.kind, ds.envs[0].height,
                                                 ds.envs[0].width, variant);
    if (a.i("k") > 0) net_config.k_iters = a.i("k");

    TrainConfig tc;
    tc.batch_size = a.i("batch");
    tc.learning_rate =
        a.d("lr") > 0 ? a.d("lr") : (variant == NetVariant::kUntied ? 1e-4 : 1e-3);
    tc.bptt_window = a.i("window");
    tc.round1_limit = a.i("l1");
    tc.round2_limit = a.i("l2");
    tc.patience = a.i("patience");
    tc.lr_decay = a.d("lr-decay");
    tc.max_decay_iters = a.i("decays");
    tc.val_fraction = a.d("val-fraction");
    tc.max_epochs = a.i("max-epochs");
    tc.grad_clip = a.d("grad-clip");
    tc.seed = a.u("seed");
    tc.threads = a.i("threads");
    tc.fixed_env_mode = a.b("fixed") || ds.manifest.fixed_env;

    auto [params, report] = curriculum_train(ds, net_config, tc);
    json meta;
    meta["trained_on"] = a.s("data");
    meta["stop_reason"] = report.stop_reason;
    meta["best_val_loss"] = report.best_val_loss;
    save_model(params, a.require_path("out"), meta.dump());
    {
        std::ofstream rep(a.s("out") + "/train_report.json", std::ios::binary);
        rep << train_report_json(report) << "\n";
    }

    json out;
    out["out"] = a.s("out");
    out["epochs"] = report.epochs.size();
    out["best_epoch"] = report.best_epoch;
    out["best_val_loss"] = report.best_val_loss;
    out["final_val_accuracy"] =
        report.epochs.empty() ? 0.0 : report.epochs.back().val_accuracy;
    out["stop_reason"] = report.stop_reason;
    out["params_checksum"] = params_checksum(params);
    std::cout << out.dump(2) << std::endl;
    return 0;
}

int cmd_solve(const std::vector<std::string>& argv) {
    std::vector<OptSpec> opts = domain_opts();
    opts.push_back({"trials", 'i', "500", "number of evaluation trials"});
    opts.push_back({"seed", 'u', "0", "evaluation seed"});
    opts.push_back({"threads", 'i', "1", "worker threads"});
    opts.push_back({"pomdp", 's', "", "evaluate QMDP on a .pomdp file instead of a domain"});
    opts.push_back({"cap", 'i', "251", "step cap for .pomdp evaluation"});
    opts.push_back({"out", 's', "", "optional report file"});
    Args a("solve", opts);
    if (!a.parse(argv)) return 0;

    EvalReport report;
    if (!a.s("pomdp").empty()) {
        TabularPomdp model = parse_pomdp_file(a.s("pomdp"));
        report = evaluate_pomdp_qmdp(model, a.i("trials"), a.i("cap"), a.u("seed"),
                                     a.i("threads"));
    } else {
        report = evaluate_reference(domain_config_from(a), a.i("trials"), a.u("seed"),
                                    a.i("threads"));
    }
    report.config_echo = a.echo().dump();
    const std::string text = eval_report_json(report);
    if (!a.s("out").empty()) {
        std::ofstream f(a.s("out"), std::ios::binary);
        f << text << "\n";
    }
    std::cout << text << std::endl;
    return 0;
}

int cmd_eval(const std::vector<std::string>& argv) {
    std::vector<OptSpec> opts = domain_opts();
    opts.push_back({"model", 's', "", "model directory"});
    opts.push_back({"data", 's', "", "test dataset directory (overrides the generator)"});
    opts.push_back({"trials", 'i', "500", "number of evaluation trials"});
    opts.push_back({"seed", 'u', "0", "evaluation seed"});
    opts.push_back({"threads", 'i', "1", "worker threads"});
    opts.push_back({"out", 's', "", "optional report file"});
    Args a("eval", opts);
    if (!a.parse(argv)) return 0;

    QmdpNetParams params = load_model(a.require_path("model"));
    EvalReport report;
    if (!a.s("data").empty()) {
        Dataset ds = load_dataset(a.s("data"));
        report = evaluate_net_on_dataset(params, ds, a.i("trials"), a.u("seed"));
    } else {
        report = evaluate_net(params, domain_config_from(a), a.i("trials"), a.u("seed"),
                              a.i("threads"));
    }
    report.config_echo = a.echo().dump();
    const std::string text = eval_report_json(report);
    if (!a.s("out").empty()) {
        std::ofstream f(a.s("out"), std::ios::binary);
        f << text << "\n";
    }
    std::cout << text << std::endl;
    return 0;
}

int cmd_transfer(const std::vector<std::string>& argv) {
    std::vector<OptSpec> opts = {
        {"model", 's', "", "tied model directory"},
        {"map", 's', "intel", "map preset: intel | freiburg | belgioioso | mit"},
        {"data-dir", 's', "data", "directory holding the map images"},
        {"k", 's', "", "execution K values, comma separated (default: K,2K,5K)"},
        {"trials", 'i', "20", "trials per K"},
        {"variant", 's', "det", "simulation variant"},
        {"threshold", 'i', "128", "occupancy threshold"},
        {"seed", 'u', "0", "evaluation seed"},
        {"threads", 'i', "1", "worker threads"},
        {"out", 's', "", "optional report file"},
    };
    Args a("transfer", opts);
    if (!a.parse(argv)) return 0;

    QmdpNetParams params = load_model(a.require_path("model"));
    GridEnv map_env = load_preset_map(a.s("map"), a.s("data-dir"), a.i("threshold"));
    std::vector<int> ks;
    if (a.s("k").empty()) {
        ks = {params.config.k_iters, 2 * params.config.k_iters, 5 * params.config.k_iters};
    } else {
        std::stringstream ss(a.s("k"));
        std::string tok;
        while (std::getline(ss, tok, ',')) ks.push_back(std::stoi(tok));
    }
    const std::uint64_t before = params_checksum(params);
    auto results = transfer_eval(params, map_env, variant_from_name(a.s("variant")), ks,
                                 a.i("trials"), a.u("seed"), a.i("threads"));
    json out;
    out["map"] = a.s("map");
    out["height"] = map_env.height;
    out["width"] = map_env.width;
    out["params_checksum_before"] = before;
    out["params_checksum_after"] = params_checksum(params);
    json per_k = json::array();
    for (const TransferResult& r : results) {
        json e = json::parse(eval_report_json(r.report));
        e["k"] = r.k;
        e.erase("records");
        per_k.push_back(e);
    }
    out["results"] = per_k;
    const std::string text = out.dump(2);
    if (!a.s("out").empty()) {
        std::ofstream f(a.s("out"), std::ios::binary);
        f << text << "\n";
    }
    std::cout << text << std::endl;
    return 0;
}

int cmd_viz(const std::vector<std::string>& argv) {
    std::vector<OptSpec> opts = domain_opts();
    opts.push_back({"model", 's', "", "model directory (omit with --inject true)"});
    opts.push_back({"inject", 'b', "false", "use ground-truth injected weights"});
    opts.push_back({"steps", 'i', "8", "episode steps to render"});
    opts.push_back({"seed", 'u', "0", "environment/task seed"});
    opts.push_back({"out", 's', "", "output directory"});
    Args a("viz", opts);
    if (!a.parse(argv)) return 0;

    DomainConfig config = domain_config_from(a);
    if (config.kind != DomainKind::kGrid)
        throw ConfigError("viz: grid domains only");
    GridEnv env = config.make_env(0, a.u("seed"));
    Rng rng(split_seed(a.u("seed"), 1));
    TaskParams task = sample_task(env, rng);

    QmdpNetParams params;
    TabularPomdp gt;
    if (a.b("inject")) {
        gt = build_shift_invariant_pomdp(env, config.variant, task);
        NetConfig nc = NetConfig::for_domain(config.kind, env.height, env.width);
        params = inject_ground_truth(nc, gt, env);
    } else {
        params = load_model(a.require_path("model"));
        gt = build_ground_truth_pomdp(env, config.variant, task);
    }
    auto files = emit_visualizations(params, env, config.variant, task, gt,
                                     a.require_path("out"), a.i("steps"), a.u("seed") ^ 7);
    json out;
    out["out"] = a.s("out");
    out["file_count"] = files.size();
    std::cout << out.dump(2) << std::endl;
    return 0;
}

int cmd_gradcheck(const std::vector<std::string>& argv) {
    std::vector<OptSpec> opts = {
        {"seed", 'u', "1", "base seed"},
        {"configs", 'i', "1", "number of seeded configurations to check"},
        {"n", 'i', "4", "board size"},
        {"k", 'i', "3", "planner iterations"},
        {"eps", 'd', "1e-5", "finite-difference step"},
        {"tolerance", 'd', "1e-3", "max relative error allowed"},
        {"samples", 'i', "25", "sampled coordinates per parameter tensor"},
    };
    Args a("gradcheck", opts);
    if (!a.parse(argv)) return 0;

    double worst = 0.0;
    std::string worst_param;
    int coords = 0;
    for (int c = 0; c < a.i("configs"); ++c) {
        const std::uint64_t seed = a.u("seed") + static_cast<std::uint64_t>(c);
        GridEnv env = gen_grid_env(a.i("n"), 0.25, seed);
        Rng rng(split_seed(seed, 11));
        TaskParams task = sample_task(env, rng);
        NetConfig nc = NetConfig::for_domain(DomainKind::kGrid, a.i("n"), a.i("n"));
        nc.k_iters = a.i("k");
        QmdpNetParams params = init_params(nc, seed);

        const int action = rng.next_int(nc.n_actions);
        const int obs = rng.next_int(nc.n_task_obs());
        const int label = rng.next_int(nc.n_actions);

        std::vector<Tensor> tensors;
        std::vector<std::string> names;
        for (const auto& kv : params.parameters()) {
            names.push_back(kv.first);
            tensors.push_back(*kv.second);
        }
        auto build = [&](Graph& g, const std::vector<NodeId>& ids) {
            NetNodes nodes = net_nodes_from_ids(params, ids);
            return g_composed_step_loss(g, params, nodes, task.theta, action, obs, label,
                                        nc.k_iters);
        };
        GradCheckReport rep = grad_check(build, tensors, a.d("eps"), a.i("samples"), seed, &names);
        coords += rep.coords_checked;
        if (rep.max_rel_error > worst) {
            worst = rep.max_rel_error;
            worst_param = rep.worst_param;
        }
    }
    json out;
    out["max_rel_error"] = worst;
    out["worst_param"] = worst_param;
    out["coords_checked"] = coords;
    out["tolerance"] = a.d("tolerance");
    out["pass"] = worst < a.d("tolerance");
    std::cout << out.dump(2) << std::endl;
    return worst < a.d("tolerance") ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 2; i < argc; ++i) args.emplace_back(argv[i]);
    const std::string cmd = argc >= 2 ? argv[1] : "";
    try {
        if (cmd == "gen") return cmd_gen(args);
        if (cmd == "train") return cmd_train(args);
        if (cmd == "eval") return cmd_eval(args);
        if (cmd == "solve") return cmd_solve(args);
        if (cmd == "transfer") return cmd_transfer(args);
        if (cmd == "viz") return cmd_viz(args);
        if (cmd == "gradcheck") return cmd_gradcheck(args);
        std::cerr << "usage: qmdpnet <gen|train|eval|solve|transfer|viz|gradcheck> [--help]\n";
        return cmd.empty() || cmd == "--help" || cmd == "help" ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace qmdpnet
