// framecast: generate synthetic moving-object datasets, train the LSTM
// autoencoder predictor, and evaluate it against trivial baselines.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "framecast/data.hpp"
#include "framecast/errors.hpp"
#include "framecast/model.hpp"
#include "framecast/pipeline.hpp"
#include "framecast/preprocess.hpp"
#include "framecast/sim.hpp"
#include "framecast/train.hpp"

namespace {

using namespace fc;

constexpr const char* kUsage = R"(usage: framecast <command> [--config FILE] [--<key> <value> ...] <command args>

commands:
  gen      --out FILE                 generate a dataset (uses 'episodes' key)
  pretrain --data FILE --out FILE     train the dense frame autoencoder
  train    --data FILE --out FILE [--init FILE] [--report FILE] [--report-txt FILE]
  predict  --model FILE --data FILE --episode N --outdir DIR
  eval     --model FILE --data FILE [--split all|val]
  dump     --data FILE --outdir DIR [--episode N] [--limit K]

Any config key (see README) can be set with --key value; precedence is
defaults < config file < FRAMECAST_SEED < flags.

exit codes: 0 ok, 1 usage/config, 2 io, 3 format, 4 shape, 5 runtime
)";

struct Args {
    PipelineConfig config;
    std::string out, data, model, init, report, report_txt, outdir, split = "all";
    long episode = -1;
    long limit = -1;
};

bool is_path_flag(const std::string& f) {
    return f == "out" || f == "data" || f == "model" || f == "init" || f == "report" ||
           f == "report-txt" || f == "outdir" || f == "episode" || f == "limit" || f == "split";
}

Args parse_args(int argc, char** argv) {
    Args a;
    // first pass: pull out --config so file values come before flag overrides
    std::vector<std::pair<std::string, std::string>> pairs;
    for (int i = 2; i < argc; ++i) {
        std::string flag = argv[i];
        if (flag.rfind("--", 0) != 0) throw config_error("unexpected argument '" + flag + "'");
        flag = flag.substr(2);
        std::string value;
        const std::size_t eq = flag.find('=');
        if (eq != std::string::npos) {
            value = flag.substr(eq + 1);
            flag = flag.substr(0, eq);
        } else {
            if (i + 1 >= argc) throw config_error("flag --" + flag + " needs a value");
            value = argv[++i];
        }
        pairs.emplace_back(flag, value);
    }
    for (const auto& [flag, value] : pairs)
        if (flag == "config") a.config.load_file(value);
    a.config.apply_env();
    for (const auto& [flag, value] : pairs) {
        if (flag == "config") continue;
        if (is_path_flag(flag)) {
            if (flag == "out") a.out = value;
            else if (flag == "data") a.data = value;
            else if (flag == "model") a.model = value;
            else if (flag == "init") a.init = value;
            else if (flag == "report") a.report = value;
            else if (flag == "report-txt") a.report_txt = value;
            else if (flag == "outdir") a.outdir = value;
            else if (flag == "split") {
                if (value != "all" && value != "val")
                    throw config_error("--split must be all or val");
                a.split = value;
            } else if (flag == "episode") a.episode = std::stol(value);
            else if (flag == "limit") a.limit = std::stol(value);
        } else {
            // config keys also accept the hyphenated spelling (--t-in)
            std::string key = flag;
            for (char& ch : key)
                if (ch == '-') ch = '_';
            a.config.set(key, value);
        }
    }
    return a;
}

void log_config(const PipelineConfig& cfg) {
    std::cout << "# resolved config\n" << cfg.resolved() << "# end config\n";
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw config_error(msg);
}

void check_dataset_matches(const Dataset& ds, const ModelConfig& mc) {
    if (ds.rows != mc.frame_rows || ds.cols != mc.frame_cols)
        throw shape_error("dataset frames are " + std::to_string(ds.rows) + "x" +
                          std::to_string(ds.cols) + ", config expects " +
                          std::to_string(mc.frame_rows) + "x" + std::to_string(mc.frame_cols));
    if (ds.t_in != mc.t_in || ds.t_out != mc.t_out)
        throw shape_error("dataset windows are " + std::to_string(ds.t_in) + "+" +
                          std::to_string(ds.t_out) + ", config expects " +
                          std::to_string(mc.t_in) + "+" + std::to_string(mc.t_out));
    if (mc.conditioned && (ds.action_dim != mc.action_dim || ds.state_dim != mc.state_dim))
        throw shape_error("dataset action/state dims " + std::to_string(ds.action_dim) + "/" +
                          std::to_string(ds.state_dim) + " do not match config " +
                          std::to_string(mc.action_dim) + "/" + std::to_string(mc.state_dim));
}

std::vector<Tensor2> all_frames_prepared(const Dataset& ds, const PrepConfig& prep) {
    std::vector<Tensor2> frames;
    frames.reserve(ds.episodes.size() * (ds.t_in + ds.t_out));
    for (const Episode& ep : ds.episodes) {
        for (const Frame& f : ep.input_frames) frames.push_back(as_column(preprocess(f, prep)));
        for (const Frame& f : ep.target_frames) frames.push_back(as_column(preprocess(f, prep)));
    }
    return frames;
}

int cmd_gen(const Args& a) {
    require(!a.out.empty(), "gen: --out is required");
    log_config(a.config);
    const WorldSpec world = a.config.world_spec();
    GenResult result = generate_dataset_episodes(
        world, static_cast<std::uint32_t>(a.config.episodes),
        static_cast<std::uint32_t>(a.config.t_in), static_cast<std::uint32_t>(a.config.t_out));
    save_dataset(a.out, result.dataset);
    std::cout << "gen: wrote " << result.dataset.episodes.size() << " episodes ("
              << result.dataset.episodes.size() * a.config.t_in << " input frames) to " << a.out
              << "\n";
    if (result.skipped_trials)
        std::cout << "gen: warning: " << result.skipped_trials
                  << " trials were shorter than one window and were skipped\n";
    return 0;
}

int cmd_pretrain(const Args& a) {
    require(!a.data.empty() && !a.out.empty(), "pretrain: --data and --out are required");
    log_config(a.config);
    const Dataset ds = load_dataset(a.data);
    const ModelConfig mc = a.config.model_config();
    check_dataset_matches(ds, mc);

    OptimConfig oc = a.config.optim_config();
    oc.epochs = a.config.pretrain_epochs;
    oc.batch_size = a.config.pretrain_batch_size;
    const std::vector<Tensor2> frames = all_frames_prepared(ds, a.config.prep_config());
    PretrainResult pre = pretrain_dense(frames, mc.feature_dim, oc, a.config.init_scale);

    Rng rng(a.config.seed);
    ModelParams params = ModelParams::init(mc, rng, a.config.init_scale, a.config.forget_bias);
    params.enc_dense = pre.enc;
    params.dec_dense = pre.dec;
    save_checkpoint(a.out, params);
    std::cout << "pretrain: " << frames.size() << " frames, " << pre.epoch_loss.size()
              << " epochs, final recon mse " << pre.epoch_loss.back() << "\n"
              << "pretrain: wrote checkpoint " << a.out << "\n";
    return 0;
}

int cmd_train(const Args& a) {
    require(!a.data.empty() && !a.out.empty(), "train: --data and --out are required");
    log_config(a.config);
    const Dataset ds = load_dataset(a.data);
    const ModelConfig mc = a.config.model_config();
    check_dataset_matches(ds, mc);

    ModelParams params = [&] {
        if (!a.init.empty()) {
            ModelParams loaded = load_checkpoint(a.init);
            if (!(loaded.config == mc))
                throw shape_error("checkpoint " + a.init + " was built for a different config");
            return loaded;
        }
        Rng rng(a.config.seed);
        return ModelParams::init(mc, rng, a.config.init_scale, a.config.forget_bias);
    }();

    const std::vector<PreparedEpisode> prepared = prepare_dataset(ds, a.config.prep_config());
    TrainReport report = train(params, prepared, a.config.optim_config());
    save_checkpoint(a.out, params);
    if (!a.report.empty()) write_report_csv(a.report, report);
    if (!a.report_txt.empty()) write_report_txt(a.report_txt, report);

    std::cout << "train: " << report.epochs.size() << " epochs, final train loss "
              << report.epochs.back().train_loss << ", val recon " << report.epochs.back().val_recon
              << ", val pred " << report.epochs.back().val_pred << "\n"
              << "train: wrote checkpoint " << a.out << "\n";
    return 0;
}

int cmd_predict(const Args& a) {
    require(!a.model.empty() && !a.data.empty() && !a.outdir.empty(),
            "predict: --model, --data and --outdir are required");
    require(a.episode >= 0, "predict: --episode is required");
    log_config(a.config);
    const ModelParams params = load_checkpoint(a.model);
    const Dataset ds = load_dataset(a.data);
    check_dataset_matches(ds, params.config);
    require(static_cast<std::size_t>(a.episode) < ds.episodes.size(),
            "predict: episode index out of range (dataset has " +
                std::to_string(ds.episodes.size()) + ")");

    const PreparedEpisode ep =
        prepare_episode(ds.episodes[static_cast<std::size_t>(a.episode)], a.config.prep_config());
    const std::vector<Tensor2> feats = embed_frames(params, ep.inputs);
    const LstmState ctx = encode(params, feats);
    const std::vector<Tensor2> pred = decode_prediction(
        params, ctx, feats.back(), params.config.conditioned ? &ep.cond : nullptr);

    std::filesystem::create_directories(a.outdir);
    for (std::size_t h = 0; h < pred.size(); ++h) {
        write_pgm(a.outdir + "/pred_" + std::to_string(h + 1) + ".pgm", quantize_frame(pred[h]));
        Tensor2 gt(params.config.frame_rows, params.config.frame_cols);
        gt.data = ep.targets[h].data;
        write_pgm(a.outdir + "/gt_" + std::to_string(h + 1) + ".pgm", quantize_frame(gt));
    }
    std::cout << "predict: wrote " << pred.size() << " predicted + " << pred.size()
              << " ground-truth frames to " << a.outdir << "\n";
    for (std::size_t h = 0; h < pred.size(); ++h) {
        double sq = 0.0;
        for (std::size_t k = 0; k < ep.targets[h].size(); ++k) {
            const double d = pred[h].data[k] - ep.targets[h][k];
            sq += d * d;
        }
        std::cout << "predict: horizon " << (h + 1) << " mse "
                  << sq / static_cast<double>(ep.targets[h].size()) << "\n";
    }
    return 0;
}

int cmd_eval(const Args& a) {
    require(!a.model.empty() && !a.data.empty(), "eval: --model and --data are required");
    log_config(a.config);
    const ModelParams params = load_checkpoint(a.model);
    const Dataset ds = load_dataset(a.data);
    check_dataset_matches(ds, params.config);

    std::vector<PreparedEpisode> prepared = prepare_dataset(ds, a.config.prep_config());
    if (a.split == "val") {
        const std::size_t val_count = prepared.size() / 10;
        require(val_count > 0, "eval: dataset too small for --split val");
        prepared.erase(prepared.begin(), prepared.end() - static_cast<long>(val_count));
    }

    const EvalMetrics m = evaluate(params, prepared);
    std::printf("eval: %zu episodes (%s split)\n", prepared.size(), a.split.c_str());
    std::printf("%-10s %12s %12s %12s\n", "horizon", "model", "copy", "linear");
    for (std::size_t h = 0; h < m.model_horizon_mse.size(); ++h)
        std::printf("%-10zu %12.6f %12.6f %12.6f\n", h + 1, m.model_horizon_mse[h],
                    m.copy_horizon_mse[h], m.linear_horizon_mse[h]);
    std::printf("%-10s %12.6f %12.6f %12.6f\n", "mean", m.model_pred_mean, m.copy_pred_mean,
                m.linear_pred_mean);
    std::printf("recon mse  %12.6f\n", m.model_recon_mse);
    std::printf("model/copy ratio %.4f\n",
                m.copy_pred_mean > 0 ? m.model_pred_mean / m.copy_pred_mean : 0.0);
    return 0;
}

int cmd_dump(const Args& a) {
    require(!a.data.empty() && !a.outdir.empty(), "dump: --data and --outdir are required");
    const Dataset ds = load_dataset(a.data);
    std::filesystem::create_directories(a.outdir);
    std::size_t begin = 0, end = ds.episodes.size();
    if (a.episode >= 0) {
        require(static_cast<std::size_t>(a.episode) < ds.episodes.size(),
                "dump: episode index out of range");
        begin = static_cast<std::size_t>(a.episode);
        end = begin + 1;
    }
    if (a.limit >= 0) end = std::min(end, begin + static_cast<std::size_t>(a.limit));
    std::size_t written = 0;
    for (std::size_t e = begin; e < end; ++e) {
        const Episode& ep = ds.episodes[e];
        for (std::size_t k = 0; k < ep.input_frames.size(); ++k, ++written)
            write_pgm(a.outdir + "/ep" + std::to_string(e) + "_in" + std::to_string(k) + ".pgm",
                      ep.input_frames[k]);
        for (std::size_t k = 0; k < ep.target_frames.size(); ++k, ++written)
            write_pgm(a.outdir + "/ep" + std::to_string(e) + "_tgt" + std::to_string(k) + ".pgm",
                      ep.target_frames[k]);
    }
    std::cout << "dump: wrote " << written << " frames to " << a.outdir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << kUsage;
        return 1;
    }
    const std::string cmd = argv[1];
    try {
        const Args args = parse_args(argc, argv);
        if (cmd == "gen") return cmd_gen(args);
        if (cmd == "pretrain") return cmd_pretrain(args);
        if (cmd == "train") return cmd_train(args);
        if (cmd == "predict") return cmd_predict(args);
        if (cmd == "eval") return cmd_eval(args);
        if (cmd == "dump") return cmd_dump(args);
        std::cerr << "unknown command '" << cmd << "'\n" << kUsage;
        return 1;
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const format_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const shape_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    }
}
