#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "plot.hpp"
#include "run_config.hpp"
#include "statelab/analysis.hpp"
#include "statelab/datasets.hpp"
#include "statelab/error.hpp"
#include "statelab/nn/checkpoint.hpp"
#include "statelab/nn/heads.hpp"
#include "statelab/pipeline.hpp"

namespace statelab::cli {
namespace {

struct Globals {
  std::string config_path;
  int threads = 1;
  CLI::Option* threads_opt = nullptr;

  nlohmann::json file() const {
    return config_path.empty() ? nlohmann::json::object() : load_config_file(config_path);
  }
  std::vector<std::string> inputs(std::vector<std::string> more) const {
    if (!config_path.empty()) more.insert(more.begin(), config_path);
    return more;
  }
};

std::string default_task_path(const std::string& task, const std::string& suffix) {
  std::string s = task;
  std::replace(s.begin(), s.end(), ':', '_');
  return s + suffix;
}

std::string epoch_csv(const std::vector<nn::EpochLog>& logs) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "epoch,recon,kl,triplet,lambda_start,lambda_end,total\n";
  for (const auto& l : logs) {
    os << l.epoch << ',' << l.recon << ',' << l.kl << ',' << l.triplet << ',' << l.lambda_start << ','
       << l.lambda_end << ',' << l.total << '\n';
  }
  return os.str();
}

nlohmann::json epoch_json(const std::vector<nn::EpochLog>& logs) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& l : logs) {
    a.push_back({l.epoch, l.recon, l.kl, l.triplet, l.lambda_start, l.lambda_end, l.total});
  }
  return a;
}

std::vector<nn::EpochLog> epochs_from_json(const nlohmann::json& a) {
  std::vector<nn::EpochLog> out;
  for (const auto& r : a) {
    nn::EpochLog l;
    l.epoch = r.at(0).get<int>();
    l.recon = r.at(1).get<double>();
    l.kl = r.at(2).get<double>();
    l.triplet = r.at(3).get<double>();
    l.lambda_start = r.at(4).get<double>();
    l.lambda_end = r.at(5).get<double>();
    l.total = r.at(6).get<double>();
    out.push_back(l);
  }
  return out;
}

std::string predictions_csv(std::span<const double> truth, std::span<const double> pred) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "index,truth,prediction\n";
  for (std::size_t i = 0; i < truth.size(); ++i) os << i << ',' << truth[i] << ',' << pred[i] << '\n';
  return os.str();
}

// ---------------------------------------------------------------- gen

struct GenCommand {
  CLI::App* app = nullptr;
  OptionSet opts{nullptr};
  std::string family;
  int count = 0;
  int train_count = -1;
  int modes = 5;
  std::uint64_t seed = 0;
  int max_retries = 20;
  std::string out;
  std::vector<int> mode_set;
  std::vector<int> ranks;
  double xi_min = std::numeric_limits<double>::quiet_NaN();
  double xi_max = std::numeric_limits<double>::quiet_NaN();

  void setup(CLI::App& root) {
    app = root.add_subcommand("gen", "Generate a dataset of one state family");
    opts = OptionSet(app);
    opts.add("family", family, "pretrain, ood, negativity, noon, cat or squeezed");
    opts.add("count", count, "number of states (0: family default)");
    opts.add("train_count", train_count, "training split size (-1: family default)");
    opts.add("modes", modes, "number of modes for the negativity family");
    opts.add("seed", seed, "base seed");
    opts.add("max_retries", max_retries, "resampling attempts per state");
    opts.add("out", out, "output file (default <family>.sldata)");
    opts.add("mode_set", mode_set, "pretrain/ood: allowed mode counts");
    opts.add("ranks", ranks, "pretrain/ood: allowed stellar ranks");
    opts.add("xi_min", xi_min, "pretrain/ood: lower squeezing bound");
    opts.add("xi_max", xi_max, "pretrain/ood: upper squeezing bound");
  }

  int run(const Globals& g) {
    opts.resolve(g.file(), "gen");
    if (family.empty()) throw ValidationError("gen: --family is required");
    GenConfig c = default_gen_config(parse_family(family));
    c.count = count;
    c.train_count = train_count;
    c.num_modes = modes;
    c.seed = seed;
    c.max_retries = max_retries;
    c.threads = resolve_threads(g.threads, g.threads_opt->count() > 0);
    if (!mode_set.empty()) c.pretrain.modes = mode_set;
    if (!ranks.empty()) c.pretrain.ranks = ranks;
    if (!std::isnan(xi_min)) c.pretrain.xi_min = xi_min;
    if (!std::isnan(xi_max)) c.pretrain.xi_max = xi_max;
    if (out.empty()) out = family + ".sldata";

    const Dataset ds = generate_dataset(c, [](const std::string& msg) { std::cerr << msg << '\n'; });
    save_dataset(out, ds);
    nlohmann::json config = opts.resolved();
    config["threads"] = c.threads;
    config["ranges"] = ds.manifest.ranges;
    write_manifest("gen", config, g.inputs({}), {out});
    std::cout << describe(ds.manifest) << "written to " << out << '\n';
    return 0;
  }
};

// ---------------------------------------------------------------- pretrain

struct PretrainCommand {
  CLI::App* app = nullptr;
  OptionSet opts{nullptr};
  std::string data;
  std::string out = "osfm.ckpt";
  std::string log;
  std::string resume;
  int epochs = 200;
  std::uint64_t seed = 0;
  double lr = 1e-3;
  int batch_states = 16;
  int subsets_per_state = 2;
  int queries_per_subset = 16;
  double kl_weight = 0.01;
  double triplet_weight_max = 0.2;
  double margin = 1.0;
  int checkpoint_every = 0;

  void setup(CLI::App& root) {
    app = root.add_subcommand("pretrain", "Pretrain the representation and generation networks");
    opts = OptionSet(app);
    const nn::TrainConfig d;
    epochs = d.epochs;
    lr = d.adam.lr;
    batch_states = d.batch_states;
    subsets_per_state = d.subsets_per_state;
    queries_per_subset = d.queries_per_subset;
    kl_weight = d.kl_weight;
    triplet_weight_max = d.triplet_weight_max;
    margin = d.margin;
    opts.add("data", data, "pretraining dataset");
    opts.add("out", out, "checkpoint path");
    opts.add("log", log, "per-epoch CSV (default <out>.log.csv)");
    opts.add("resume", resume, "continue from this checkpoint");
    opts.add("epochs", epochs, "total number of epochs");
    opts.add("seed", seed, "initialization and sampling seed");
    opts.add("lr", lr, "Adam learning rate");
    opts.add("batch_states", batch_states, "states per step");
    opts.add("subsets_per_state", subsets_per_state, "context subsets drawn per state");
    opts.add("queries_per_subset", queries_per_subset, "query settings per subset");
    opts.add("kl_weight", kl_weight, "weight of the KL term");
    opts.add("triplet_weight_max", triplet_weight_max, "final triplet weight");
    opts.add("margin", margin, "triplet margin");
    opts.add("checkpoint_every", checkpoint_every, "snapshot to <out>.epochN every N epochs (0: off)");
  }

  int run(const Globals& g) {
    opts.resolve(g.file(), "pretrain");
    if (data.empty()) throw ValidationError("pretrain: --data is required");
    if (log.empty()) log = out + ".log.csv";

    const Dataset ds = load_dataset(data);
    const auto ptrs = entry_pointers(ds);
    const std::vector<nn::PretrainSample> samples = to_pretrain_samples(ptrs);

    nn::Checkpoint ckpt;
    std::vector<nn::EpochLog> history;
    std::vector<std::string> inputs{data};
    if (!resume.empty()) {
      ckpt = nn::load_checkpoint(resume);
      inputs.push_back(resume);
      if (ckpt.metadata.contains("log")) history = epochs_from_json(ckpt.metadata["log"]);
      ckpt.config.epochs = epochs;
    } else {
      nn::TrainConfig c;
      c.epochs = epochs;
      c.seed = seed;
      c.adam.lr = lr;
      c.batch_states = batch_states;
      c.subsets_per_state = subsets_per_state;
      c.queries_per_subset = queries_per_subset;
      c.kl_weight = kl_weight;
      c.triplet_weight_max = triplet_weight_max;
      c.margin = margin;
      ckpt.config = c;
      ckpt.model = nn::OsfmModel::create(c.dims, mix_seed(seed, 0x6f73666d));
    }
    if (ckpt.epochs_done >= ckpt.config.epochs) {
      throw ValidationError("pretrain: checkpoint already has " + std::to_string(ckpt.epochs_done) + " epochs");
    }

    auto store = [&](int done, const std::string& path) {
      ckpt.epochs_done = done;
      ckpt.metadata["log"] = epoch_json(history);
      ckpt.metadata["dataset_hash"] = content_hash(data);
      nn::save_checkpoint(path, ckpt);
    };
    nn::pretrain(ckpt.model, ckpt.adam, samples, ckpt.config, ckpt.epochs_done, [&](const nn::EpochLog& l) {
      history.push_back(l);
      std::cerr << "epoch " << l.epoch << " recon " << l.recon << " kl " << l.kl << " triplet " << l.triplet
                << " lambda " << l.lambda_end << '\n';
      const int done = l.epoch + 1;
      if (checkpoint_every > 0 && done % checkpoint_every == 0 && done < ckpt.config.epochs) {
        store(done, out + ".epoch" + std::to_string(done));
      }
    });
    store(ckpt.config.epochs, out);
    write_text(log, epoch_csv(history));

    nlohmann::json config = opts.resolved();
    config["train_config"] = nn::to_json(ckpt.config);
    write_manifest("pretrain", config, g.inputs(inputs), {out, log});
    std::cout << "pretrained " << ckpt.config.epochs << " epochs on " << samples.size() << " states; wrote " << out
              << " and " << log << '\n';
    return 0;
  }
};

// ---------------------------------------------------------------- eval-ood

struct EvalCommand {
  CLI::App* app = nullptr;
  OptionSet opts{nullptr};
  std::string checkpoint;
  std::string id;
  std::string ood;
  std::string out = "eval_report.csv";
  std::uint64_t seed = 0;
  double xi_band = 0.05;

  void setup(CLI::App& root) {
    app = root.add_subcommand("eval-ood", "Bucketed query fidelity on in- and out-of-distribution states");
    opts = OptionSet(app);
    opts.add("checkpoint", checkpoint, "pretrained checkpoint");
    opts.add("ood", ood, "out-of-distribution dataset");
    opts.add("id", id, "in-distribution dataset (optional)");
    opts.add("out", out, "report CSV");
    opts.add("seed", seed, "context/query split seed");
    opts.add("xi_band", xi_band, "squeezing bucket width");
  }

  int run(const Globals& g) {
    opts.resolve(g.file(), "eval-ood");
    if (checkpoint.empty() || ood.empty()) throw ValidationError("eval-ood: --checkpoint and --ood are required");
    const nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint);
    const Dataset ood_ds = load_dataset(ood);
    Dataset id_ds;
    std::vector<std::string> inputs{checkpoint, ood};
    if (!id.empty()) {
      id_ds = load_dataset(id);
      inputs.push_back(id);
    }
    ReportOptions ro;
    ro.seed = seed;
    ro.xi_band_width = xi_band;
    const auto id_ptrs = entry_pointers(id_ds);
    const auto ood_ptrs = entry_pointers(ood_ds);
    const EvalReport rep = fidelity_report(model_predictor(ckpt.model), id_ptrs, ood_ptrs, ro);
    write_text(out, rep.to_csv());
    write_manifest("eval-ood", opts.resolved(), g.inputs(inputs), {out});
    for (const auto& [key, s] : rep.by_rank) {
      std::cout << (key.first ? "OOD" : "ID") << " r=" << key.second << " fidelity " << s.mean_fidelity << " (n="
                << s.count << ")\n";
    }
    std::cout << "rank trend non-increasing: " << (rep.rank_non_increasing ? "yes" : "no") << "\nwrote " << out
              << '\n';
    return 0;
  }
};

// ---------------------------------------------------------------- finetune / predict

std::vector<const StateDatasetEntry*> select_split(const Dataset& ds, const std::string& split) {
  if (split == "all") return entry_pointers(ds);
  if (split == "train") return ds.split(Split::kTrain);
  if (split == "test") return ds.split(Split::kTest);
  throw ValidationError("unknown split '" + split + "'");
}

void check_modes(std::span<const StateDatasetEntry* const> entries, int modes) {
  if (modes <= 0) return;
  for (const auto* e : entries) {
    if (e->num_modes != modes) {
      throw ValidationError("dataset has " + std::to_string(e->num_modes) + "-mode states, --modes is " +
                            std::to_string(modes));
    }
  }
}

std::string metrics_csv(const std::string& task, const std::string& model, int train, std::span<const double> pred,
                        std::span<const double> truth, double* headline) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "metric,value\n";
  os << "task," << task << "\nmodel," << model << "\ntrain_count," << train << "\ntest_count," << truth.size()
     << '\n';
  if (nn::task_info(task).classification) {
    const ClassificationMetrics m = classification_metrics(pred, truth);
    os << "accuracy," << m.accuracy << "\ntrue_positive," << m.true_positive << "\ntrue_negative,"
       << m.true_negative << "\nfalse_positive," << m.false_positive << "\nfalse_negative," << m.false_negative
       << '\n';
    *headline = m.accuracy;
  } else {
    *headline = r_squared(pred, truth);
    os << "r2," << *headline << '\n';
  }
  return os.str();
}

struct FinetuneCommand {
  CLI::App* app = nullptr;
  OptionSet opts{nullptr};
  std::string task;
  std::string data;
  std::string checkpoint;
  bool from_scratch = false;
  std::string baseline;
  int train_count = 0;
  int modes = 0;
  int epochs = 200;
  int batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double encoder_lr_scale = 1.0;
  bool freeze_encoder = false;
  std::string out;

  void setup(CLI::App& root) {
    app = root.add_subcommand("finetune", "Train a property head (and the encoder) on labelled states");
    opts = OptionSet(app);
    const nn::FinetuneConfig d;
    epochs = d.epochs;
    batch = d.batch;
    lr = d.adam.lr;
    encoder_lr_scale = d.encoder_lr_scale;
    opts.add("task", task, "negativity, noon:purity, noon:fidelity, cat:size, cat:fidelity, squeezed:qfi, "
                           "squeezed:fidelity");
    opts.add("data", data, "labelled dataset (train split trains, test split scores)");
    opts.add("checkpoint", checkpoint, "pretrained checkpoint");
    opts.add_flag("from_scratch", from_scratch, "start from a randomly initialized encoder");
    opts.add("baseline", baseline, "'fcnn': fully connected network on raw histograms");
    opts.add("train_count", train_count, "use only the first N training states (0: all)");
    opts.add("modes", modes, "expected number of modes per state (0: any)");
    opts.add("epochs", epochs, "training epochs");
    opts.add("batch", batch, "minibatch size");
    opts.add("lr", lr, "Adam learning rate");
    opts.add("encoder_lr_scale", encoder_lr_scale, "encoder learning rate relative to --lr");
    opts.add("seed", seed, "head initialization and shuffling seed");
    opts.add_flag("freeze_encoder", freeze_encoder, "train the head only");
    opts.add("out", out, "output checkpoint (default <task>.ckpt)");
  }

  int run(const Globals& g) {
    opts.resolve(g.file(), "finetune");
    if (task.empty() || data.empty()) throw ValidationError("finetune: --task and --data are required");
    nn::task_info(task);
    const bool fcnn = baseline == "fcnn";
    if (!baseline.empty() && !fcnn) throw ValidationError("unknown baseline '" + baseline + "'");
    if (!fcnn && !from_scratch && checkpoint.empty()) {
      throw ValidationError("finetune: give --checkpoint, --from-scratch or --baseline fcnn");
    }
    if (out.empty()) out = default_task_path(task, fcnn ? ".fcnn" : ".ckpt");

    const Dataset ds = load_dataset(data);
    if (task_family(task) != ds.manifest.family) {
      throw ValidationError("task " + task + " needs a " + to_string(task_family(task)) + " dataset");
    }
    auto train = ds.split(Split::kTrain);
    const auto test = ds.split(Split::kTest);
    if (train_count > 0) {
      if (train_count > static_cast<int>(train.size())) {
        throw ValidationError("finetune: only " + std::to_string(train.size()) + " training states");
      }
      train.resize(static_cast<std::size_t>(train_count));
    }
    if (train.empty() || test.empty()) throw ValidationError("finetune: empty train or test split");
    check_modes(train, modes);
    check_modes(test, modes);
    const auto train_ex = to_examples(train, task);
    const auto test_ex = to_examples(test, task);

    nn::FinetuneConfig fc;
    fc.epochs = epochs;
    fc.batch = batch;
    fc.adam.lr = lr;
    fc.encoder_lr_scale = encoder_lr_scale;
    fc.seed = seed;
    fc.freeze_encoder = freeze_encoder;

    nlohmann::json meta = {{"task", task},
                           {"from_scratch", from_scratch},
                           {"baseline", baseline},
                           {"train_count", train_ex.size()},
                           {"finetune_config", nn::to_json(fc)}};
    std::vector<std::string> inputs{data};
    std::vector<double> pred;
    std::string model_name;
    if (fcnn) {
      model_name = "fcnn";
      for (const auto* set : {&train_ex, &test_ex}) {
        for (const auto& ex : *set) {
          if (ex.records.size() != train_ex.front().records.size()) {
            throw ValidationError("the fcnn baseline needs the same measurement settings for every state; " +
                                  task + " states have varying contexts");
          }
        }
      }
      const nn::FcnnBaseline net = nn::train_fcnn(task, train_ex, fc);
      nn::save_fcnn(out, net, meta);
      pred = nn::fcnn_predict(net, test_ex);
    } else {
      nn::Checkpoint ckpt;
      if (from_scratch) {
        model_name = "from_scratch";
        ckpt.model = nn::OsfmModel::create(nn::ModelDims{}, mix_seed(seed, 0x6f73666d));
      } else {
        model_name = "pretrained";
        ckpt = nn::load_checkpoint(checkpoint);
        inputs.push_back(checkpoint);
        ckpt.adam = nn::AdamState{};
      }
      nn::finetune(ckpt.model, task, train_ex, fc);
      meta["pretrain"] = ckpt.metadata.is_object() ? ckpt.metadata.value("dataset_hash", "") : "";
      ckpt.metadata = meta;
      nn::save_checkpoint(out, ckpt);
      pred = nn::predict_batch(ckpt.model, task, test_ex);
    }
    std::vector<double> truth;
    for (const auto& ex : test_ex) truth.push_back(ex.label);
    double headline = 0.0;
    const std::string metrics_path = out + ".metrics.csv";
    const std::string pred_path = out + ".predictions.csv";
    write_text(metrics_path, metrics_csv(task, model_name, static_cast<int>(train_ex.size()), pred, truth, &headline));
    write_text(pred_path, predictions_csv(truth, pred));

    write_manifest("finetune", opts.resolved(), g.inputs(inputs), {out, metrics_path, pred_path});
    std::cout << task << " (" << model_name << ", " << train_ex.size() << " labels): "
              << (nn::task_info(task).classification ? "accuracy " : "R2 ") << headline << "\nwrote " << out
              << ", " << metrics_path << ", " << pred_path << '\n';
    return 0;
  }
};

struct PredictCommand {
  CLI::App* app = nullptr;
  OptionSet opts{nullptr};
  std::string checkpoint;
  std::string task;
  std::string data;
  std::string split = "all";
  std::string out = "predictions.csv";

  void setup(CLI::App& root) {
    app = root.add_subcommand("predict", "Predict a property for every state of a dataset");
    opts = OptionSet(app);
    opts.add("checkpoint", checkpoint, "fine-tuned checkpoint or FCNN baseline file");
    opts.add("task", task, "task id of the head to use");
    opts.add("data", data, "dataset");
    opts.add("split", split, "all, train or test");
    opts.add("out", out, "predictions CSV");
  }

  int run(const Globals& g) {
    opts.resolve(g.file(), "predict");
    if (checkpoint.empty() || task.empty() || data.empty()) {
      throw ValidationError("predict: --checkpoint, --task and --data are required");
    }
    const Dataset ds = load_dataset(data);
    const auto ex = to_examples(select_split(ds, split), task);
    std::vector<double> pred;
    std::vector<double> truth;
    for (const auto& e : ex) truth.push_back(e.label);
    // Checkpoint and baseline files differ by magic; try the model first.
    try {
      const nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint);
      if (!ckpt.model.heads.contains(task)) throw ValidationError("checkpoint has no head for " + task);
      pred = nn::predict_batch(ckpt.model, task, ex);
    } catch (const IoError&) {
      const nn::FcnnBaseline net = nn::load_fcnn(checkpoint);
      if (net.task != task) throw ValidationError("baseline was trained for " + net.task);
      pred = nn::fcnn_predict(net, ex);
    }
    write_text(out, predictions_csv(truth, pred));
    write_manifest("predict", opts.resolved(), g.inputs({checkpoint, data}), {out});
    std::cout << "wrote " << pred.size() << " predictions to " << out << '\n';
    return 0;
  }
};

// ---------------------------------------------------------------- embed

struct EmbedCommand {
  CLI::App* app = nullptr;
  OptionSet opts{nullptr};
  std::string checkpoint;
  std::vector<std::string> data;
  int per_family = 500;
  std::uint64_t seed = 0;
  double perplexity = 30.0;
  int iterations = 1000;
  std::string out = "embedding.csv";

  void setup(CLI::App& root) {
    app = root.add_subcommand("embed", "t-SNE of state representations");
    opts = OptionSet(app);
    opts.add("checkpoint", checkpoint, "pretrained checkpoint");
    opts.add("data", data, "one or more datasets");
    opts.add("per_family", per_family, "states sampled per dataset (0: all)");
    opts.add("seed", seed, "sampling and t-SNE seed");
    opts.add("perplexity", perplexity, "t-SNE perplexity");
    opts.add("iterations", iterations, "t-SNE iterations");
    opts.add("out", out, "embedding CSV");
  }

  int run(const Globals& g) {
    opts.resolve(g.file(), "embed");
    if (checkpoint.empty() || data.empty()) throw ValidationError("embed: --checkpoint and --data are required");
    const nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint);
    std::vector<std::unique_ptr<Dataset>> sets;
    std::vector<EmbedInput> states;
    for (std::size_t k = 0; k < data.size(); ++k) {
      sets.push_back(std::make_unique<Dataset>(load_dataset(data[k])));
      const Dataset& ds = *sets.back();
      std::vector<std::size_t> idx(ds.entries.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      if (per_family > 0 && idx.size() > static_cast<std::size_t>(per_family)) {
        Rng rng(mix_seed(seed, k));
        std::shuffle(idx.begin(), idx.end(), rng.engine());
        idx.resize(static_cast<std::size_t>(per_family));
        std::sort(idx.begin(), idx.end());
      }
      for (std::size_t i : idx) states.push_back({&ds.entries[i], to_string(ds.manifest.family)});
    }
    if (static_cast<double>(states.size()) <= 3.0 * perplexity) {
      throw ValidationError("embed: " + std::to_string(states.size()) + " states are too few for perplexity " +
                            std::to_string(perplexity));
    }
    TsneConfig tc;
    tc.seed = seed;
    tc.perplexity = perplexity;
    tc.iterations = iterations;
    const auto rows = embed_states(ckpt.model, states, tc);
    write_text(out, embedding_csv(rows));
    std::vector<std::string> inputs{checkpoint};
    inputs.insert(inputs.end(), data.begin(), data.end());
    write_manifest("embed", opts.resolved(), g.inputs(inputs), {out});
    std::cout << "embedded " << rows.size() << " states; wrote " << out << '\n';
    return 0;
  }
};

// ---------------------------------------------------------------- plot

struct PlotCommand {
  CLI::App* app = nullptr;
  OptionSet opts{nullptr};
  std::string input;
  std::string out;
  std::string kind = "auto";
  std::string title;

  void setup(CLI::App& root) {
    app = root.add_subcommand("plot", "Render a report, embedding, prediction or training-log CSV as SVG");
    opts = OptionSet(app);
    opts.add("input", input, "CSV written by another command");
    opts.add("out", out, "SVG path (default <input>.svg)");
    opts.add("kind", kind, "auto, report, embedding, predictions or log");
    opts.add("title", title, "figure title");
  }

  int run(const Globals& g) {
    opts.resolve(g.file(), "plot");
    if (input.empty()) throw ValidationError("plot: --input is required");
    if (out.empty()) out = input + ".svg";
    Figure fig = figure_from_csv(read_csv(input), parse_plot_kind(kind));
    if (!title.empty()) fig.title = title;
    write_text(out, render_svg(fig));
    write_manifest("plot", opts.resolved(), g.inputs({input}), {out});
    std::cout << "wrote " << out << '\n';
    return 0;
  }
};

int run_main(int argc, char** argv) {
  CLI::App app{"statelab: optical state simulation, pretraining and property prediction"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON config file; flags override its values")->check(CLI::ExistingFile);
  g.threads_opt = app.add_option("--threads", g.threads, "worker threads (default: STATELAB_THREADS or 1)");

  GenCommand gen;
  PretrainCommand pre;
  EvalCommand eval;
  FinetuneCommand fine;
  PredictCommand predict;
  EmbedCommand embed;
  PlotCommand plot;
  gen.setup(app);
  pre.setup(app);
  eval.setup(app);
  fine.setup(app);
  predict.setup(app);
  embed.setup(app);
  plot.setup(app);
  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::kValidation);
  }

  try {
    if (gen.app->parsed()) return gen.run(g);
    if (pre.app->parsed()) return pre.run(g);
    if (eval.app->parsed()) return eval.run(g);
    if (fine.app->parsed()) return fine.run(g);
    if (predict.app->parsed()) return predict.run(g);
    if (embed.app->parsed()) return embed.run(g);
    if (plot.app->parsed()) return plot.run(g);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace
}  // namespace statelab::cli

int main(int argc, char** argv) { return statelab::cli::run_main(argc, argv); }
