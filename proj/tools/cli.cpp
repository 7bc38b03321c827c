#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <sstream>

#include "bridge/checkpoint.hpp"
#include "bridge/continual.hpp"
#include "bridge/data_io.hpp"
#include "bridge/error.hpp"
#include "bridge/vsa_bench.hpp"

namespace bridge::cli {

namespace fs = std::filesystem;

namespace {

enum Stream : std::uint64_t { kAutoencoderStream = 6, kGenerateStream = 7, kDistillStream = 8 };

struct Common {
  std::string data;
  std::size_t dim = 1024;
  std::size_t hidden = 0;
  std::string algebra = "fhrr";
  std::string extractor = "raw";
  std::size_t epochs = 5;
  std::size_t batch = 64;
  double lr = 1e-3;
  double noise_sigma = 0.05;
  std::uint64_t seed = 1;
  std::size_t latent = 256;
  std::size_t ae_epochs = 5;
  std::string out;
};

struct Loaded {
  Dataset train;
  Dataset test;
  std::string features_dir;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void add_data_options(CLI::App* sub, Common& c) {
  sub->add_option("--data", c.data, "Directory with train-*/t10k-* IDX files")->required();
  sub->add_option("--extractor", c.extractor,
                  "raw | autoencoder | precomputed:<dir with train.brgf and test.brgf>")
      ->capture_default_str();
}

void add_model_options(CLI::App* sub, Common& c) {
  sub->add_option("--dim", c.dim, "Symbol dimension")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--hidden", c.hidden, "Hidden width (0 = dim)")->capture_default_str();
  sub->add_option("--algebra", c.algebra, "fhrr | control")
      ->capture_default_str()
      ->check(CLI::IsMember({"fhrr", "control"}));
  sub->add_option("--noise-sigma", c.noise_sigma, "Label noise for generation (half-turns)")
      ->capture_default_str();
  sub->add_option("--latent", c.latent, "Autoencoder latent width")->capture_default_str();
  sub->add_option("--ae-epochs", c.ae_epochs, "Autoencoder training epochs")->capture_default_str();
}

void add_train_options(CLI::App* sub, Common& c) {
  sub->add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
  sub->add_option("--batch", c.batch, "Batch size")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
}

void add_out(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out, "Output directory")->required();
}

std::string extractor_kind(const std::string& spec) {
  const auto colon = spec.find(':');
  return spec.substr(0, colon);
}

void validate_extractor(const std::string& spec) {
  const auto kind = extractor_kind(spec);
  parse_extractor_kind(kind);
  if (kind == "precomputed" && spec.find(':') == std::string::npos)
    throw InvalidArgument("--extractor precomputed needs a directory: precomputed:<dir>");
}

void attach_features(Dataset& ds, const fs::path& file) {
  ds.features = load_features(file);
  if (ds.features.rows() != ds.size())
    throw DataError("feature file '" + file.string() + "' has " + std::to_string(ds.features.rows()) +
                    " rows for " + std::to_string(ds.size()) + " samples");
}

Loaded load_data(const std::string& data, const std::string& extractor_spec, bool need_train = true) {
  Loaded l;
  if (need_train) l.train = load_idx_split(data, "train");
  l.test = load_idx_split(data, "test");
  if (extractor_kind(extractor_spec) == "precomputed") {
    l.features_dir = extractor_spec.substr(extractor_spec.find(':') + 1);
    if (need_train) attach_features(l.train, fs::path(l.features_dir) / "train.brgf");
    attach_features(l.test, fs::path(l.features_dir) / "test.brgf");
  }
  return l;
}

FeatureExtractor build_extractor(const Common& c, const Loaded& data, std::ostream& out) {
  const auto kind = parse_extractor_kind(extractor_kind(c.extractor));
  if (kind == ExtractorKind::RawPixel) return FeatureExtractor::raw_pixel(data.train.images.cols());
  if (kind == ExtractorKind::Precomputed) return FeatureExtractor::precomputed(data.train.features.cols());
  AutoencoderConfig ac;
  ac.latent = c.latent;
  ac.epochs = c.ae_epochs;
  auto rng = derive_rng(c.seed, kAutoencoderStream);
  AutoencoderReport rep;
  auto fx = train_autoencoder(data.train.images, ac, rng, &rep);
  out << "autoencoder held-out mse " << fmt(reconstruction_mse(fx, data.test.images)) << "\n";
  return fx;
}

NetConfig net_config(const Common& c) {
  NetConfig n;
  n.dim = c.dim;
  n.hidden = c.hidden;
  n.algebra = parse_algebra(c.algebra);
  n.noise_sigma = c.noise_sigma;
  n.seed = c.seed;
  return n;
}

TrainOptions train_options(const Common& c) {
  TrainOptions o;
  o.epochs = c.epochs;
  o.batch = c.batch;
  o.adam.lr = c.lr;
  return o;
}

void prepare_out(const std::string& out, const CLI::App& app) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError("cannot create output directory '" + out + "'");
  // Only the subcommand that ran, in a form --config accepts back.
  std::string cfg;
  for (const auto* sub : app.get_subcommands())
    cfg += "[" + sub->get_name() + "]\n" + sub->config_to_str(true, false);
  write_text(fs::path(out) / "config.ini", cfg);
}

std::string train_csv(const std::vector<EpochMetrics>& ms) {
  std::string s = "epoch,channel,fwd_loss,rev_loss,test_acc\n";
  for (const auto& m : ms) {
    const std::string acc = m.test_accuracy ? fmt(*m.test_accuracy) : "";
    s += std::to_string(m.epoch) + ",image," + fmt(m.image.fwd) + "," + fmt(m.image.rev) + "," + acc + "\n";
    s += std::to_string(m.epoch) + ",label," + fmt(m.label.fwd) + "," + fmt(m.label.rev) + "," + acc + "\n";
  }
  return s;
}

Manifest run_meta(const Common& c, const Loaded& data) {
  Manifest meta;
  meta["data"] = c.data;
  meta["extractor_spec"] = c.extractor;
  if (!data.features_dir.empty()) meta["features"] = data.features_dir;
  return meta;
}

// Reattaches the precomputed test features a checkpoint was trained with.
Loaded load_for_checkpoint(const fs::path& ckpt, const std::string& data_override, bool need_train) {
  const auto meta = checkpoint_meta(ckpt);
  std::string data = data_override;
  if (data.empty()) {
    const auto it = meta.find("data");
    if (it == meta.end()) throw InvalidArgument("--data is required (checkpoint does not record it)");
    data = it->second;
  }
  const auto spec = meta.count("extractor_spec") ? meta.at("extractor_spec") : std::string("raw");
  return load_data(data, spec, need_train);
}

template <class F>
int guarded(F&& body, std::ostream& err) {
  try {
    body();
    return kOk;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bridge network experiments", "bridge"};
  app.set_config("--config", "", "INI/TOML config file (flags override it)");
  app.require_subcommand(1);
  Common c;

  auto* train = app.add_subcommand("train", "Fit vectorizer, train channels, write checkpoint and CSV");
  add_data_options(train, c);
  add_model_options(train, c);
  add_train_options(train, c);
  train->add_option("--seed", c.seed, "Seed")->capture_default_str();
  add_out(train, c);

  std::vector<std::string> checkpoints;
  auto* eval = app.add_subcommand("eval", "Report test accuracy of one or more checkpoints");
  eval->add_option("--checkpoint", checkpoints, "Checkpoint directories")->required();
  eval->add_option("--data", c.data, "IDX directory (default: recorded in checkpoint)");
  eval->add_option("--out", c.out, "Optional output directory for eval.csv");

  std::vector<std::size_t> dims{64, 256, 1024};
  std::vector<std::string> algebras{"fhrr", "control"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  auto* sweep = app.add_subcommand("sweep", "Accuracy over dims x algebras x seeds");
  add_data_options(sweep, c);
  add_train_options(sweep, c);
  sweep->add_option("--dims", dims, "Dimensions")->capture_default_str()->delimiter(',');
  sweep->add_option("--algebras", algebras, "Algebras")->capture_default_str()->delimiter(',')
      ->check(CLI::IsMember({"fhrr", "control"}));
  sweep->add_option("--seeds", seeds, "Seeds")->capture_default_str()->delimiter(',');
  sweep->add_option("--hidden", c.hidden, "Hidden width (0 = dim)")->capture_default_str();
  add_out(sweep, c);

  std::string checkpoint;
  std::size_t per_class = 64;
  std::optional<double> gen_sigma;
  auto* generate = app.add_subcommand("generate", "Write generated images per class as PGM");
  generate->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  generate->add_option("--per-class", per_class, "Images per class")->capture_default_str();
  generate->add_option("--noise-sigma", gen_sigma, "Override label noise");
  generate->add_option("--seed", c.seed, "Seed")->capture_default_str();
  add_out(generate, c);

  DistillOptions dopt;
  auto* distill_cmd = app.add_subcommand("distill", "Self-distill fused symbols from a checkpoint");
  distill_cmd->add_option("--checkpoint", checkpoint, "Teacher checkpoint")->required();
  distill_cmd->add_option("--count", dopt.count, "Symbols")->capture_default_str();
  distill_cmd->add_option("--steps", dopt.steps, "Optimization steps")->capture_default_str();
  distill_cmd->add_option("--step-size", dopt.step_size, "Adam step size")->capture_default_str();
  distill_cmd->add_option("--seed", c.seed, "Seed")->capture_default_str();
  add_out(distill_cmd, c);

  std::string distilled_dir;
  bool random_init = false;
  std::uint64_t init_seed = 1000;
  std::size_t student_epochs = 20;
  auto* dtrain = app.add_subcommand("distill-train", "Train a student on a distilled set");
  dtrain->add_option("--checkpoint", checkpoint, "Teacher checkpoint")->required();
  dtrain->add_option("--distilled", distilled_dir, "Distilled set directory")->required();
  dtrain->add_flag("--random-init", random_init, "Re-randomize student channels instead of sharing the teacher's initial weights");
  dtrain->add_option("--init-seed", init_seed, "Seed for --random-init")->capture_default_str();
  dtrain->add_option("--epochs", student_epochs, "Student epochs")->capture_default_str();
  dtrain->add_option("--batch", c.batch, "Batch size")->capture_default_str();
  dtrain->add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
  dtrain->add_option("--data", c.data, "IDX directory (default: recorded in checkpoint)");
  dtrain->add_option("--seed", c.seed, "Shuffle seed")->capture_default_str();
  add_out(dtrain, c);

  ContinualOptions copt;
  std::string scenario = "distilled";
  std::size_t classes_per_task = 2;
  auto* continual = app.add_subcommand("continual", "Class-incremental run with replay");
  add_data_options(continual, c);
  add_model_options(continual, c);
  continual->add_option("--scenario", scenario, "stored-raw | stored-fused | distilled | none")
      ->capture_default_str()
      ->check(CLI::IsMember({"stored-raw", "stored-fused", "distilled", "none"}));
  continual->add_option("--classes-per-task", classes_per_task, "Classes per task")->capture_default_str();
  continual->add_option("--epochs-per-task", copt.epochs_per_task, "Epochs per task")->capture_default_str();
  continual->add_option("--replay-ratio", copt.replay_ratio, "Replay items per new item")->capture_default_str();
  continual->add_option("--replay-multiplier", copt.replay_multiplier, "Per-task replay growth")->capture_default_str();
  continual->add_option("--distill-count", copt.distill.count, "Distilled buffer size")->capture_default_str();
  continual->add_option("--distill-steps", copt.distill.steps, "Distillation steps")->capture_default_str();
  continual->add_option("--batch", c.batch, "Batch size")->capture_default_str();
  continual->add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
  continual->add_option("--seed", c.seed, "Seed")->capture_default_str();
  add_out(continual, c);

  std::size_t pairs = 10000;
  auto* bench = app.add_subcommand("vsa-bench", "Measure FHRR statistics against their expected values");
  bench->add_option("--dim", c.dim, "Dimension")->capture_default_str();
  bench->add_option("--pairs", pairs, "Random pairs")->capture_default_str();
  bench->add_option("--seed", c.seed, "Seed")->capture_default_str();
  bench->add_option("--out", c.out, "Optional output directory for vsa_bench.csv");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  // Cheap validation before any data is touched.
  const int valid = guarded(
      [&] {
        if (train->parsed() || sweep->parsed() || continual->parsed()) validate_extractor(c.extractor);
        if (continual->parsed() && scenario == "distilled" && c.algebra != "fhrr")
          throw InvalidArgument("the distilled scenario needs --algebra fhrr");
      },
      err);
  if (valid != kOk) return valid;

  return guarded(
      [&] {
        if (train->parsed()) {
          prepare_out(c.out, app);
          const auto data = load_data(c.data, c.extractor);
          auto fx = build_extractor(c, data, out);
          auto net = BridgeNetwork::create(net_config(c), fx, fx.extract(data.train));
          const auto ms = bridge::train(net, data.train, &data.test, train_options(c));
          write_text(fs::path(c.out) / "train.csv", train_csv(ms));
          save_checkpoint(net, fs::path(c.out) / "checkpoint", run_meta(c, data));
          out << "test accuracy " << fmt(*ms.back().test_accuracy) << "\n";
        } else if (eval->parsed()) {
          std::vector<double> accs;
          std::string csv = "checkpoint,accuracy\n";
          for (const auto& ck : checkpoints) {
            const auto net = load_checkpoint(ck);
            const auto data = load_for_checkpoint(ck, c.data, false);
            accs.push_back(net.accuracy(data.test));
            csv += ck + "," + fmt(accs.back()) + "\n";
            out << ck << " accuracy " << fmt(accs.back()) << "\n";
          }
          const double mean = std::accumulate(accs.begin(), accs.end(), 0.0) / double(accs.size());
          double var = 0.0;
          for (double a : accs) var += (a - mean) * (a - mean);
          const double sd = accs.size() > 1 ? std::sqrt(var / double(accs.size() - 1)) : 0.0;
          out << "mean accuracy " << fmt(mean) << " +- " << fmt(sd) << " (n=" << accs.size() << ")\n";
          if (!c.out.empty()) {
            prepare_out(c.out, app);
            write_text(fs::path(c.out) / "eval.csv", csv);
          }
        } else if (sweep->parsed()) {
          prepare_out(c.out, app);
          const auto data = load_data(c.data, c.extractor);
          std::string csv = "dim,algebra,seed,accuracy\n";
          for (auto d : dims)
            for (const auto& a : algebras)
              for (auto s : seeds) {
                Common rc = c;
                rc.dim = d;
                rc.algebra = a;
                rc.seed = s;
                auto fx = build_extractor(rc, data, out);
                auto net = BridgeNetwork::create(net_config(rc), fx, fx.extract(data.train));
                auto opt = train_options(rc);
                opt.evaluate_each_epoch = false;
                const auto ms = bridge::train(net, data.train, &data.test, opt);
                const double acc = *ms.back().test_accuracy;
                csv += std::to_string(d) + "," + a + "," + std::to_string(s) + "," + fmt(acc) + "\n";
                out << "dim " << d << " " << a << " seed " << s << " accuracy " << fmt(acc) << "\n";
                write_text(fs::path(c.out) / "sweep.csv", csv);
              }
        } else if (generate->parsed()) {
          prepare_out(c.out, app);
          const auto net = load_checkpoint(checkpoint);
          auto rng = derive_rng(c.seed, kGenerateStream);
          for (std::size_t k = 0; k < net.config().num_classes; ++k) {
            const std::vector<std::size_t> labels(per_class, k);
            const auto imgs = net.generate(labels, rng, gen_sigma);
            for (std::size_t i = 0; i < per_class; ++i)
              write_pgm(imgs.row(i), fs::path(c.out) /
                                         ("class" + std::to_string(k) + "_" + std::to_string(i) + ".pgm"));
          }
          out << "wrote " << per_class * net.config().num_classes << " images to " << c.out << "\n";
        } else if (distill_cmd->parsed()) {
          prepare_out(c.out, app);
          const auto net = load_checkpoint(checkpoint);
          auto rng = derive_rng(c.seed, kDistillStream);
          const auto d = distill(net, dopt, rng);
          save_distilled(d, c.out);
          out << "loop loss " << fmt(d.history.front()) << " -> " << fmt(d.history.back()) << "\n";
        } else if (dtrain->parsed()) {
          prepare_out(c.out, app);
          const auto teacher = load_checkpoint(checkpoint);
          const auto d = load_distilled(distilled_dir);
          if (d.fused.cols() != teacher.dim())
            throw DataError("distilled set dim " + std::to_string(d.fused.cols()) +
                            " does not match checkpoint dim " + std::to_string(teacher.dim()));
          const auto data = load_for_checkpoint(checkpoint, c.data, false);
          auto student = make_student(teacher, !random_init, init_seed);
          TrainOptions o;
          o.epochs = student_epochs;
          o.batch = c.batch;
          o.adam.lr = c.lr;
          o.evaluate_each_epoch = false;
          auto rng = derive_rng(c.seed, 5);
          const auto ms = train_on_symbol_pairs(student, d.image_symbols, d.label_symbols, o, rng, &data.test);
          write_text(fs::path(c.out) / "train.csv", train_csv(ms));
          save_checkpoint(student, fs::path(c.out) / "checkpoint", checkpoint_meta(checkpoint));
          out << "teacher accuracy " << fmt(teacher.accuracy(data.test)) << "\n";
          out << "student accuracy " << fmt(*ms.back().test_accuracy) << " ("
              << (random_init ? "re-randomized" : "shared") << " init)\n";
        } else if (continual->parsed()) {
          prepare_out(c.out, app);
          const auto data = load_data(c.data, c.extractor);
          const auto seq = split_tasks(data.train, &data.test, classes_per_task);
          Loaded first = data;
          first.train = subset(data.train, seq.train_idx.front());
          auto fx = build_extractor(c, first, out);
          auto net = make_continual_network(net_config(c), fx, data.train, seq);
          copt.scenario = parse_scenario(scenario);
          copt.batch = c.batch;
          copt.adam.lr = c.lr;
          copt.seed = c.seed;
          const auto m = run_scenario(net, data.train, data.test, seq, copt);
          std::string csv = "stage,task,accuracy\n";
          for (std::size_t t = 0; t < m.a.size(); ++t)
            for (std::size_t k = 0; k <= t; ++k)
              csv += std::to_string(t) + "," + std::to_string(k) + "," + fmt(m.a[t][k]) + "\n";
          write_text(fs::path(c.out) / "continual.csv", csv);
          const auto r = forgetting_report(m);
          std::ostringstream rep;
          rep << "scenario " << scenario << "\nfinal_overall " << fmt(r.final_overall)
              << "\nmean_forgetting " << fmt(r.mean_forgetting) << "\n";
          for (std::size_t k = 0; k < r.per_task.size(); ++k)
            rep << "forgetting_task" << k << " " << fmt(r.per_task[k]) << "\n";
          for (std::size_t t = 0; t < m.buffer_sizes.size(); ++t)
            rep << "buffer_stage" << t << " " << m.buffer_sizes[t] << "\n";
          write_text(fs::path(c.out) / "forgetting.txt", rep.str());
          out << rep.str();
        } else if (bench->parsed()) {
          const auto r = run_vsa_bench(c.dim, pairs, c.seed);
          std::string csv = "quantity,measured,expected\n";
          csv += "self_similarity_error," + fmt(r.self_similarity_error) + ",0\n";
          csv += "bind_roundtrip_error," + fmt(r.bind_roundtrip_error) + ",0\n";
          csv += "random_pair_mean," + fmt(r.random_mean) + ",0\n";
          csv += "random_pair_std," + fmt(r.random_std) + "," + fmt(r.expected_random_std) + "\n";
          csv += "bundle2_member_similarity," + fmt(r.bundle_member_mean) + "," +
                 fmt(r.expected_bundle_member) + "\n";
          out << csv;
          if (!c.out.empty()) {
            prepare_out(c.out, app);
            write_text(fs::path(c.out) / "vsa_bench.csv", csv);
          }
        }
      },
      err);
}

}  // namespace bridge::cli
