#include "bridge/continual.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "bridge/error.hpp"

namespace bridge {

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::StoredRaw: return "stored-raw";
    case Scenario::StoredFused: return "stored-fused";
    case Scenario::Distilled: return "distilled";
    case Scenario::None: return "none";
  }
  return "?";
}

Scenario parse_scenario(const std::string& s) {
  if (s == "stored-raw") return Scenario::StoredRaw;
  if (s == "stored-fused") return Scenario::StoredFused;
  if (s == "distilled") return Scenario::Distilled;
  if (s == "none") return Scenario::None;
  throw InvalidArgument("unknown scenario '" + s +
                        "' (expected stored-raw|stored-fused|distilled|none)");
}

TaskSequence split_tasks(const Dataset& train, const Dataset* test, std::size_t classes_per_task) {
  const std::size_t nc = std::max(train.num_classes(), test ? test->num_classes() : 0);
  if (classes_per_task == 0 || nc % classes_per_task != 0)
    throw InvalidArgument("split_tasks: classes_per_task " + std::to_string(classes_per_task) +
                          " does not divide " + std::to_string(nc) + " classes");
  const std::size_t nt = nc / classes_per_task;
  TaskSequence seq;
  seq.classes.resize(nt);
  seq.train_idx.resize(nt);
  seq.test_idx.resize(nt);
  for (std::size_t c = 0; c < nc; ++c) seq.classes[c / classes_per_task].push_back(std::uint8_t(c));
  for (std::size_t i = 0; i < train.size(); ++i) seq.train_idx[train.labels[i] / classes_per_task].push_back(i);
  if (test)
    for (std::size_t i = 0; i < test->size(); ++i) seq.test_idx[test->labels[i] / classes_per_task].push_back(i);
  return seq;
}

std::size_t ReplayBuffer::size() const noexcept {
  switch (kind_) {
    case Scenario::StoredRaw: return raw_idx_.size();
    case Scenario::StoredFused: return fused_.rows();
    case Scenario::Distilled: return distilled_.size();
    case Scenario::None: return 0;
  }
  return 0;
}

void ReplayBuffer::store_task(const BridgeNetwork& net, const Dataset& train,
                              std::span<const std::size_t> idx) {
  if (kind_ == Scenario::StoredRaw) {
    raw_idx_.insert(raw_idx_.end(), idx.begin(), idx.end());
  } else if (kind_ == Scenario::StoredFused) {
    std::vector<std::uint8_t> labels;
    for (auto i : idx) labels.push_back(train.labels[i]);
    const auto f = fuse(net.image_symbols(train, idx), net.label_symbols(labels), net.algebra());
    std::vector<float> all(fused_.storage());
    all.insert(all.end(), f.flat().begin(), f.flat().end());
    fused_ = Matrix<float>(fused_.rows() + f.rows(), f.cols(), std::move(all));
  }
}

void ReplayBuffer::refresh(const BridgeNetwork& net, const DistillOptions& opt, Rng& rng) {
  if (kind_ != Scenario::Distilled) return;
  DistillOptions o = opt;
  if (capacity_ != 0) o.count = capacity_;
  distilled_ = distill(net, o, rng);
  distilled_ready_ = true;
}

std::pair<Matrix<float>, Matrix<float>> ReplayBuffer::sample(const BridgeNetwork& net,
                                                             const Dataset& train,
                                                             std::size_t count, Rng& rng) const {
  const std::size_t n = size();
  if (kind_ == Scenario::Distilled && !distilled_ready_)
    throw InvalidArgument("distilled replay requested before any task was trained");
  if (kind_ == Scenario::None || count == 0 || n == 0)
    return {Matrix<float>(0, net.dim()), Matrix<float>(0, net.dim())};
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = pick(rng);
  switch (kind_) {
    case Scenario::StoredRaw: {
      std::vector<std::size_t> rows(count);
      std::vector<std::uint8_t> labels(count);
      for (std::size_t j = 0; j < count; ++j) {
        rows[j] = raw_idx_[idx[j]];
        labels[j] = train.labels[rows[j]];
      }
      return {net.image_symbols(train, rows), net.label_symbols(labels)};
    }
    case Scenario::StoredFused: {
      const auto f = gather_rows(fused_, idx);
      auto si = block_forward(net.image_channel.reverse, f);
      auto sl = block_forward(net.label_channel.reverse, f);
      to_symbol_domain(si, net.algebra());
      to_symbol_domain(sl, net.algebra());
      return {std::move(si), std::move(sl)};
    }
    case Scenario::Distilled:
      return {gather_rows(distilled_.image_symbols, idx), gather_rows(distilled_.label_symbols, idx)};
    case Scenario::None: break;
  }
  return {};
}

BridgeNetwork make_continual_network(const NetConfig& cfg, const FeatureExtractor& fx,
                                     const Dataset& train, const TaskSequence& seq) {
  require(seq.size() >= 1, "continual: empty task sequence");
  return BridgeNetwork::create(cfg, fx, fx.extract(train, seq.train_idx.front()));
}

namespace {

Matrix<float> stack_rows(const Matrix<float>& a, const Matrix<float>& b) {
  if (b.rows() == 0) return a;
  std::vector<float> v(a.storage());
  v.insert(v.end(), b.flat().begin(), b.flat().end());
  return Matrix<float>(a.rows() + b.rows(), a.cols(), std::move(v));
}

}  // namespace

AccuracyMatrix run_scenario(BridgeNetwork& net, const Dataset& train, const Dataset& test,
                            const TaskSequence& seq, const ContinualOptions& opt) {
  require(seq.size() >= 1, "continual: empty task sequence");
  require(opt.replay_ratio >= 0.0 && opt.replay_multiplier > 0.0,
          "continual: replay ratio must be >= 0 and multiplier > 0");
  if (opt.scenario == Scenario::Distilled && net.algebra() != Algebra::Fhrr)
    throw InvalidArgument("continual: distilled replay needs the FHRR algebra");
  ReplayBuffer buffer(opt.scenario, opt.scenario == Scenario::Distilled ? opt.distill.count : 0);
  auto shuffle_rng = derive_rng(opt.seed, 11);
  auto replay_rng = derive_rng(opt.seed, 12);
  auto distill_rng = derive_rng(opt.seed, 13);

  AccuracyMatrix m;
  std::vector<std::size_t> seen_test;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const auto& idx = seq.train_idx[t];
    require(!idx.empty(), "continual: task " + std::to_string(t) + " has no training samples");
    std::vector<std::uint8_t> labels;
    labels.reserve(idx.size());
    for (auto i : idx) labels.push_back(train.labels[i]);
    Matrix<float> si = net.image_symbols(train, idx);
    Matrix<float> sl = net.label_symbols(labels);
    if (t > 0) {
      const double ratio = opt.replay_ratio * std::pow(opt.replay_multiplier, double(t - 1));
      const auto count = static_cast<std::size_t>(std::llround(ratio * double(idx.size())));
      auto [ri, rl] = buffer.sample(net, train, count, replay_rng);
      si = stack_rows(si, ri);
      sl = stack_rows(sl, rl);
    }
    auto optimizers = make_optimizers(net, opt.adam);
    for (std::size_t e = 0; e < opt.epochs_per_task; ++e)
      train_symbol_epoch(net, si, sl, optimizers, shuffle_rng, opt.batch, e + 1);

    buffer.store_task(net, train, idx);
    buffer.refresh(net, opt.distill, distill_rng);
    m.buffer_sizes.push_back(buffer.size());

    const auto pred = net.classify(test);
    auto acc_on = [&](std::span<const std::size_t> rows) {
      if (rows.empty()) return 0.0;
      std::size_t hit = 0;
      for (auto r : rows) hit += pred.labels[r] == test.labels[r];
      return double(hit) / double(rows.size());
    };
    std::vector<double> row;
    std::vector<bool> seen;
    for (std::size_t k = 0; k < seq.size(); ++k) {
      row.push_back(acc_on(seq.test_idx[k]));
      seen.push_back(k <= t);
    }
    seen_test.insert(seen_test.end(), seq.test_idx[t].begin(), seq.test_idx[t].end());
    m.a.push_back(std::move(row));
    m.seen.push_back(std::move(seen));
    m.overall.push_back(acc_on(seen_test));
  }
  return m;
}

ForgettingReport forgetting_report(const AccuracyMatrix& m) {
  ForgettingReport r;
  if (m.a.empty()) return r;
  r.final_overall = m.overall.empty() ? 0.0 : m.overall.back();
  const auto& last = m.a.back();
  double sum = 0.0;
  for (std::size_t k = 0; k < last.size(); ++k) {
    double best = last[k];
    for (std::size_t t = 0; t < m.a.size(); ++t)
      if (m.seen.empty() || m.seen[t][k]) best = std::max(best, m.a[t][k]);
    r.per_task.push_back(best - last[k]);
    sum += best - last[k];
  }
  r.mean_forgetting = last.empty() ? 0.0 : sum / double(last.size());
  return r;
}

}  // namespace bridge
