// Command-line front end: dataset generation, model training, evaluation
// sweeps, side-by-side comparisons, and complexity reports.

#include <bit>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "emev/baseline.hpp"
#include "emev/channel.hpp"
#include "emev/classifier.hpp"
#include "emev/emevnet.hpp"
#include "emev/errors.hpp"
#include "emev/metrics.hpp"
#include "emev/serialize.hpp"
#include "emev/svd.hpp"
#include "emev/train.hpp"

namespace {

using namespace emev;

constexpr const char* kVersion = "emev 0.1.0";

int thread_count() {
    const char* env = std::getenv("EMEV_THREADS");
    if (!env) return 1;
    int n = std::atoi(env);
    if (n < 1) throw ConfigError("EMEV_THREADS must be a positive integer");
    return n;
}

std::string make_manifest(int argc, char** argv) {
    std::ostringstream os;
    os << kVersion;
    for (int i = 1; i < argc; ++i) os << " " << argv[i];
    return os.str();
}

ChannelProfile resolve_profile(const std::string& name, int n_rb, int n_t, int n_r) {
    ChannelProfile p = ChannelProfile::builtin(name);
    if (n_rb > 0) p.n_rb = n_rb;
    if (n_t > 0) p.n_t = n_t;
    if (n_r > 0) p.n_r = n_r;
    p.validate();
    return p;
}

// Sample-parallel generation; per-sample seeds make the result independent
// of the thread count.
Dataset generate_parallel(const ChannelProfile& profile, int count, uint64_t seed, int threads) {
    Dataset ds;
    ds.profile = profile.name;
    ds.master_seed = seed;
    ds.n_rb = profile.n_rb;
    ds.n_r = profile.n_r;
    ds.n_t = profile.n_t;
    uint8_t label = 255;
    try {
        label = static_cast<uint8_t>(ChannelProfile::builtin_label(profile.name));
    } catch (const ConfigError&) {
    }
    std::vector<ChannelTensor> tensors(static_cast<size_t>(count));
    auto work = [&](int t) {
        for (int i = t; i < count; i += threads) {
            tensors[static_cast<size_t>(i)] =
                generate_channel(profile, Rng::derive(seed, static_cast<uint64_t>(i)));
        }
    };
    if (threads <= 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }
    ds.h.reserve(static_cast<size_t>(count) * ds.sample_floats());
    for (const ChannelTensor& ct : tensors) ds.append_sample(ct, label);
    return ds;
}

float max_singular_value(const std::vector<EmevSample>& samples, const std::vector<int>& idx) {
    float m = 0.0f;
    for (int i : idx) {
        for (float v : samples.at(static_cast<size_t>(i)).s_raw.data) m = std::max(m, v);
    }
    if (m <= 0.0f) throw NumericError("training split has no singular-value energy");
    return m;
}

float max_abs_entry(const Dataset& ds, const std::vector<int>& idx) {
    float m = 0.0f;
    for (int i : idx) {
        const float* p = ds.sample(i);
        for (int64_t k = 0; k < ds.sample_floats(); ++k) m = std::max(m, std::abs(p[k]));
    }
    if (m <= 0.0f) throw NumericError("training split has no channel energy");
    return m;
}

struct TrainFlags {
    std::string data, model = "emev", config_path, out, resume;
    uint64_t seed = 1;
    int epochs = 100, batch = 64;
    double lr = 1e-3;
    int l_eps = 0;
    double beta_h = 0.0;
};

void write_model_checkpoint(const std::string& out, KvConfig config,
                            const std::vector<Parameter*>& params,
                            const std::vector<Tensor>& best_values, AdamState& opt,
                            const TrainState& state) {
    Checkpoint ck;
    state_to_kv(state, opt, config);
    ck.config = config;
    ck.params.reserve(params.size());
    for (size_t i = 0; i < params.size(); ++i) ck.params.push_back({params[i]->name, best_values[i]});
    ck.opt_state = dump_opt_state(opt, params);
    write_checkpoint(out, ck);
}

int cmd_train(const TrainFlags& f, const std::string& manifest) {
    Dataset ds = read_dataset(f.data);
    if (ds.n_samples() < 3) throw IoError("dataset too small to split: " + f.data);
    SplitIndices split = split_indices(ds.n_samples(), ds.master_seed);
    TrainHyper hyper;
    hyper.lr = f.lr;
    hyper.max_epochs = f.epochs;
    hyper.batch_size = f.batch;

    KvConfig file_kv;
    if (!f.config_path.empty()) file_kv = load_kv_file(f.config_path);
    file_kv["n_rb"] = std::to_string(ds.n_rb);
    file_kv["n_t"] = std::to_string(ds.n_t);
    file_kv["n_r"] = std::to_string(ds.n_r);

    TrainResult result;
    std::cout << "train: " << f.model << " on " << f.data << " (" << ds.n_samples()
              << " samples, split " << split.train.size() << "/" << split.val.size() << "/"
              << split.test.size() << ")\n";

    if (f.model == "emev") {
        std::vector<EmevSample> samples = decompose_dataset(ds);
        int l_eps = f.l_eps;
        if (f.beta_h > 0.0) {
            CodewordLength cl = codeword_length(f.beta_h, ds.n_rb, ds.n_r, ds.n_t);
            l_eps = cl.length;
            if (cl.floored) std::cout << "note: beta_h does not divide; floored to " << l_eps << "\n";
        }
        EmevConfig cfg;
        AdamState opt(hyper.lr);
        TrainState state;
        std::unique_ptr<EmevNet> net;
        if (!f.resume.empty()) {
            Checkpoint ck = read_checkpoint(f.resume);
            cfg = EmevConfig::from_kv(ck.config);
            net = std::make_unique<EmevNet>(cfg, f.seed);
            opt.register_params(net->parameters());
            load_params(ck.params, net->parameters());
            if (!ck.opt_state.empty()) load_opt_state(ck.opt_state, opt, net->parameters());
            state_from_kv(ck.config, state, opt);
        } else {
            if (l_eps > 0) file_kv["l_eps"] = std::to_string(l_eps);
            file_kv["s_scale"] = std::to_string(max_singular_value(samples, split.train));
            cfg = EmevConfig::from_kv(file_kv);
            net = std::make_unique<EmevNet>(cfg, f.seed);
            opt.register_params(net->parameters());
        }
        result = train_emevnet(*net, samples, split, hyper, f.seed, opt, state);
        KvConfig out_kv = net->config().to_kv();
        out_kv["model"] = "emev";
        out_kv["profile"] = ds.profile;
        out_kv["kind"] = ds.profile == "mix" ? "N_mix" : "N_sp";
        out_kv["seed"] = std::to_string(f.seed);
        if (f.beta_h > 0.0) out_kv["beta_h"] = std::to_string(f.beta_h);
        write_model_checkpoint(f.out, out_kv, net->parameters(), result.best_values, opt, state);
    } else if (f.model == "baseline") {
        BaselineConfig cfg;
        AdamState opt(hyper.lr);
        TrainState state;
        std::unique_ptr<BaselineNet> net;
        if (!f.resume.empty()) {
            Checkpoint ck = read_checkpoint(f.resume);
            cfg = BaselineConfig::from_kv(ck.config);
            net = std::make_unique<BaselineNet>(cfg, f.seed);
            opt.register_params(net->parameters());
            load_params(ck.params, net->parameters());
            if (!ck.opt_state.empty()) load_opt_state(ck.opt_state, opt, net->parameters());
            state_from_kv(ck.config, state, opt);
        } else {
            int l_eps = f.l_eps;
            if (f.beta_h > 0.0) l_eps = codeword_length(f.beta_h, ds.n_rb, ds.n_r, ds.n_t).length;
            if (l_eps > 0) file_kv["l_eps"] = std::to_string(l_eps);
            file_kv["h_scale"] = std::to_string(max_abs_entry(ds, split.train));
            cfg = BaselineConfig::from_kv(file_kv);
            net = std::make_unique<BaselineNet>(cfg, f.seed);
            opt.register_params(net->parameters());
        }
        result = train_baseline(*net, ds, split, hyper, f.seed, opt, state);
        KvConfig out_kv = net->config().to_kv();
        out_kv["model"] = "baseline";
        out_kv["profile"] = ds.profile;
        out_kv["kind"] = "N_csi";
        out_kv["seed"] = std::to_string(f.seed);
        if (f.beta_h > 0.0) out_kv["beta_h"] = std::to_string(f.beta_h);
        write_model_checkpoint(f.out, out_kv, net->parameters(), result.best_values, opt, state);
    } else if (f.model == "classifier") {
        std::vector<ClassifierFeatures> feats;
        feats.reserve(static_cast<size_t>(ds.n_samples()));
        for (int i = 0; i < ds.n_samples(); ++i) {
            feats.push_back(featurize_decomposition(svd_transform(ds.sample_tensor(i))));
        }
        ClassifierConfig cfg;
        AdamState opt(hyper.lr);
        TrainState state;
        std::unique_ptr<Classifier> cls;
        if (!f.resume.empty()) {
            Checkpoint ck = read_checkpoint(f.resume);
            cfg = ClassifierConfig::from_kv(ck.config);
            cls = std::make_unique<Classifier>(cfg, f.seed);
            opt.register_params(cls->parameters());
            load_params(ck.params, cls->parameters());
            if (!ck.opt_state.empty()) load_opt_state(ck.opt_state, opt, cls->parameters());
            state_from_kv(ck.config, state, opt);
        } else {
            cfg = ClassifierConfig::from_kv(file_kv);
            cls = std::make_unique<Classifier>(cfg, f.seed);
            opt.register_params(cls->parameters());
        }
        result = train_classifier(*cls, feats, ds.labels, split, hyper, f.seed, opt, state);
        KvConfig out_kv = cls->config().to_kv();
        out_kv["model"] = "classifier";
        out_kv["profile"] = ds.profile;
        out_kv["seed"] = std::to_string(f.seed);
        write_model_checkpoint(f.out, out_kv, cls->parameters(), result.best_values, opt, state);
    } else {
        throw UsageError("unknown --model '" + f.model + "' (emev|baseline|classifier)");
    }

    write_curve_csv(f.out + ".curve.csv", manifest, result.curve);
    std::cout << "epochs run: " << result.epochs_run
              << (result.early_stopped ? " (early stop)" : "") << "\n";
    std::cout << "best validation loss: " << result.best_val << "\n";
    std::cout << "checkpoint: " << f.out << " checksum " << std::hex << file_checksum(f.out)
              << std::dec << "\n";
    return 0;
}

EvalRow eval_checkpoint(const std::string& ckpt_path, const std::string& data_path) {
    Checkpoint ck = read_checkpoint(ckpt_path);
    std::string model = kv_get_string(ck.config, "model", "");
    Dataset ds = read_dataset(data_path);
    SplitIndices split = split_indices(ds.n_samples(), ds.master_seed);
    double beta_h = kv_get_double(ck.config, "beta_h", 0.0);
    if (model == "emev") {
        EmevConfig cfg = EmevConfig::from_kv(ck.config);
        if (cfg.n_rb != ds.n_rb || cfg.n_t != ds.n_t || cfg.n_r != ds.n_r) {
            throw DimensionError("eval: checkpoint dims do not match dataset " + data_path);
        }
        EmevNet net(cfg, 0);
        load_params(ck.params, net.parameters());
        std::vector<EmevSample> samples = decompose_dataset(ds);
        std::string kind = kv_get_string(ck.config, "kind", "N_sp");
        return evaluate_emev(net, samples, split.test, ds.profile, kind, beta_h);
    }
    if (model == "baseline") {
        BaselineConfig cfg = BaselineConfig::from_kv(ck.config);
        if (cfg.n_rb != ds.n_rb || cfg.n_t != ds.n_t || cfg.n_r != ds.n_r) {
            throw DimensionError("eval: checkpoint dims do not match dataset " + data_path);
        }
        BaselineNet net(cfg, 0);
        load_params(ck.params, net.parameters());
        return evaluate_baseline(net, ds, split.test, ds.profile, beta_h);
    }
    throw UsageError("eval: checkpoint " + ckpt_path + " has unsupported model '" + model + "'");
}

void print_complexity(const std::vector<LayerCost>& rows, const std::string& csv_path,
                      const std::string& manifest) {
    int64_t p_total = 0, f_total = 0;
    std::cout << "layer,params,flops\n";
    for (const LayerCost& r : rows) {
        std::cout << r.layer << "," << r.params << "," << r.flops << "\n";
        p_total += r.params;
        f_total += r.flops;
    }
    std::cout << "TOTAL," << p_total << "," << f_total << "\n";
    if (!csv_path.empty()) {
        std::ofstream os(csv_path);
        if (!os) throw IoError("cannot open for writing: " + csv_path);
        os << "# " << manifest << "\n";
        os << "layer,params,flops\n";
        for (const LayerCost& r : rows) os << r.layer << "," << r.params << "," << r.flops << "\n";
        os << "TOTAL," << p_total << "," << f_total << "\n";
    }
}

int run(int argc, char** argv) {
    static_assert(std::endian::native == std::endian::little,
                  "file formats are little-endian; big-endian hosts are unsupported");
    std::string manifest = make_manifest(argc, argv);

    CLI::App app{"mmWave massive-MIMO CSI feedback laboratory"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Generate a synthetic CSI dataset");
    std::string g_profile = "cdl-a-like", g_out;
    int g_count = 100, g_nrb = 0, g_nt = 0, g_nr = 0;
    uint64_t g_seed = 1;
    std::vector<std::string> g_mix;
    gen->add_option("--profile", g_profile, "builtin profile name");
    gen->add_option("--count", g_count, "sample count");
    gen->add_option("--seed", g_seed, "master seed");
    gen->add_option("--n-rb", g_nrb, "resource blocks");
    gen->add_option("--n-t", g_nt, "transmit antennas");
    gen->add_option("--n-r", g_nr, "receive antennas");
    gen->add_option("--mix", g_mix, "dataset files to concatenate instead of generating");
    gen->add_option("--out", g_out, "output dataset path")->required();

    // train
    auto* tr = app.add_subcommand("train", "Train a model");
    TrainFlags tf;
    tr->add_option("--data", tf.data, "dataset path")->required();
    tr->add_option("--model", tf.model, "emev|baseline|classifier");
    tr->add_option("--config", tf.config_path, "key=value config file");
    tr->add_option("--seed", tf.seed, "init/shuffle seed");
    tr->add_option("--epochs", tf.epochs, "maximum epochs (tau)");
    tr->add_option("--batch", tf.batch, "mini-batch size");
    tr->add_option("--lr", tf.lr, "initial learning rate");
    tr->add_option("--l-eps", tf.l_eps, "codeword payload length");
    tr->add_option("--beta-h", tf.beta_h, "compression ratio (sets l_eps)");
    tr->add_option("--resume", tf.resume, "checkpoint to resume from");
    tr->add_option("--out", tf.out, "output checkpoint path")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate checkpoints on dataset test splits");
    std::vector<std::string> e_ckpts, e_datas;
    std::string e_report;
    ev->add_option("--ckpt", e_ckpts, "checkpoint path(s)")->required();
    ev->add_option("--data", e_datas, "dataset path(s)")->required();
    ev->add_option("--report", e_report, "CSV report path")->required();

    // compare
    auto* cp = app.add_subcommand("compare", "Side-by-side specialized/mixed/baseline report");
    std::vector<std::string> c_spec, c_datas;
    std::string c_mixed, c_base, c_report;
    cp->add_option("--specialized", c_spec, "specialized checkpoints")->required();
    cp->add_option("--mixed", c_mixed, "mixed-model checkpoint")->required();
    cp->add_option("--baseline", c_base, "full-CSI baseline checkpoint");
    cp->add_option("--data", c_datas, "per-profile datasets")->required();
    cp->add_option("--report", c_report, "CSV report path")->required();

    // flops
    auto* fl = app.add_subcommand("flops", "Complexity report for a config");
    std::string f_config, f_csv;
    fl->add_option("--config", f_config, "key=value config file");
    fl->add_option("--csv", f_csv, "also write CSV here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // usage error
    }

    if (gen->parsed()) {
        Dataset ds;
        if (!g_mix.empty()) {
            std::vector<Dataset> parts;
            parts.reserve(g_mix.size());
            for (const std::string& p : g_mix) parts.push_back(read_dataset(p));
            ds = mix_datasets(parts);
        } else {
            ChannelProfile profile = resolve_profile(g_profile, g_nrb, g_nt, g_nr);
            if (g_count < 1) throw UsageError("--count must be positive");
            ds = generate_parallel(profile, g_count, g_seed, thread_count());
        }
        write_dataset(g_out, ds);
        std::cout << "wrote " << ds.n_samples() << " samples (" << ds.n_rb << " RB, " << ds.n_r
                  << "x" << ds.n_t << ") to " << g_out << " checksum " << std::hex
                  << file_checksum(g_out) << std::dec << "\n";
        return 0;
    }
    if (tr->parsed()) return cmd_train(tf, manifest);
    if (ev->parsed()) {
        std::vector<EvalRow> rows;
        for (const std::string& c : e_ckpts) {
            for (const std::string& d : e_datas) rows.push_back(eval_checkpoint(c, d));
        }
        write_report_csv(e_report, manifest, rows);
        write_report_json(e_report + ".json", manifest, rows);
        std::cout << "wrote " << rows.size() << " rows to " << e_report << "\n";
        return 0;
    }
    if (cp->parsed()) {
        // Overhead-fairness guard: every compared model must share l_eps.
        std::vector<std::string> paths = c_spec;
        paths.push_back(c_mixed);
        if (!c_base.empty()) paths.push_back(c_base);
        int l_eps = -1;
        for (const std::string& p : paths) {
            Checkpoint ck = read_checkpoint(p);
            int l = kv_get_int(ck.config, "l_eps", 0);
            if (l_eps < 0) l_eps = l;
            if (l != l_eps) {
                throw ConfigError("compare: l_eps mismatch (" + std::to_string(l) + " in " + p +
                                  " vs " + std::to_string(l_eps) + "); overhead must match");
            }
        }
        std::vector<EvalRow> rows;
        for (const std::string& d : c_datas) {
            std::vector<EvalRow> group;
            for (const std::string& s : c_spec) group.push_back(eval_checkpoint(s, d));
            EvalRow mixed = eval_checkpoint(c_mixed, d);
            group.push_back(mixed);
            EvalRow base;
            bool have_base = !c_base.empty();
            if (have_base) {
                base = eval_checkpoint(c_base, d);
                group.push_back(base);
            }
            // Deltas against the specialized model trained on this profile
            // (falling back to the first specialized checkpoint).
            size_t sp_idx = 0;
            for (size_t i = 0; i < c_spec.size(); ++i) {
                Checkpoint sck = read_checkpoint(c_spec[i]);
                if (kv_get_string(sck.config, "profile", "") == group[i].profile) {
                    sp_idx = i;
                    break;
                }
            }
            const EvalRow* sp = &group[sp_idx];
            EvalRow d_mix = *sp;
            d_mix.model_kind = "delta_sp_mix";
            d_mix.nmse_v_db = sp->nmse_v_db - mixed.nmse_v_db;
            d_mix.nmse_s_db = sp->nmse_s_db - mixed.nmse_s_db;
            d_mix.rho_v = sp->rho_v - mixed.rho_v;
            d_mix.rho_s = sp->rho_s - mixed.rho_s;
            group.push_back(d_mix);
            if (have_base) {
                EvalRow d_csi = *sp;
                d_csi.model_kind = "delta_sp_csi";
                d_csi.nmse_v_db = sp->nmse_v_db - base.nmse_v_db;
                d_csi.nmse_s_db = sp->nmse_s_db - base.nmse_s_db;
                d_csi.rho_v = sp->rho_v - base.rho_v;
                d_csi.rho_s = sp->rho_s - base.rho_s;
                group.push_back(d_csi);
            }
            rows.insert(rows.end(), group.begin(), group.end());
        }
        write_report_csv(c_report, manifest, rows);
        write_report_json(c_report + ".json", manifest, rows);
        std::cout << "wrote " << rows.size() << " rows to " << c_report << "\n";
        return 0;
    }
    if (fl->parsed()) {
        KvConfig kv;
        if (!f_config.empty()) kv = load_kv_file(f_config);
        if (kv_get_int(kv, "layers", 1) == 0) {
            // Degenerate zero-layer request: empty table.
            print_complexity({}, f_csv, manifest);
            return 0;
        }
        EmevConfig cfg = EmevConfig::from_kv(kv);
        print_complexity(complexity_report(cfg), f_csv, manifest);
        return 0;
    }
    throw UsageError("no subcommand given");
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const emev::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const emev::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const emev::IoError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const emev::DimensionError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const emev::NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
