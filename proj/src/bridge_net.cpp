#include "bridge/bridge_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bridge/error.hpp"

namespace bridge {

namespace {

enum Stream : std::uint64_t {
  kCodebookStream = 1,
  kProjectionStream = 2,
  kImageChannelStream = 3,
  kLabelChannelStream = 4,
  kShuffleStream = 5,
};

constexpr std::size_t kInferenceChunk = 1024;

template <class T>
LossReport<T> channel_loss(const Matrix<T>& pred, const Matrix<T>& target, Algebra algebra) {
  return algebra == Algebra::Fhrr ? phase_loss(pred, target) : cosine_loss(pred, target);
}

template <class T>
void append_parameters(std::vector<TensorRef<T>>& out, ResidualBlock<T>& b,
                       const std::string& prefix) {
  for (auto& p : parameters(b, prefix)) out.push_back(p);
}

std::vector<TensorRef<float>> channel_parameters(Channel<float>& c, const std::string& name) {
  std::vector<TensorRef<float>> out;
  append_parameters(out, c.forward, name + ".forward.");
  append_parameters(out, c.reverse, name + ".reverse.");
  return out;
}

// Runs both halves on one batch, applies one Adam step and returns the losses.
ChannelLosses step_channel(Channel<float>& c, const std::string& name, AdamState<float>& state,
                           const Matrix<float>& own, const Matrix<float>& fused, Algebra algebra,
                           std::size_t epoch, std::size_t batch_index) {
  BlockCache<float> cf, cr;
  const auto yf = block_forward(c.forward, own, &cf);
  const auto lf = channel_loss(yf, fused, algebra);
  const auto yr = block_forward(c.reverse, fused, &cr);
  const auto lr = channel_loss(yr, own, algebra);
  if (!std::isfinite(lf.value) || !std::isfinite(lr.value))
    throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                       std::to_string(batch_index) + ", channel " + name);
  BlockGrads<float> gf, gr;
  block_backward(c.forward, cf, lf.grad, &gf);
  block_backward(c.reverse, cr, lr.grad, &gr);
  auto params = channel_parameters(c, name);
  std::vector<std::span<const float>> grads = gradient_views(gf);
  for (auto g : gradient_views(gr)) grads.push_back(g);
  adam_step<float>(params, grads, state);
  ++c.forward.version;
  ++c.reverse.version;
  return {lf.value, lr.value};
}

Matrix<float> row_chunk(const Matrix<float>& m, std::size_t start, std::size_t count) {
  std::vector<float> v(m.data() + start * m.cols(), m.data() + (start + count) * m.cols());
  return Matrix<float>(count, m.cols(), std::move(v));
}

}  // namespace

template <class T>
Matrix<T> fuse(const Matrix<T>& a, const Matrix<T>& b, Algebra algebra) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "fuse: dimension mismatch");
  Matrix<T> out(a.rows(), a.cols());
  if (algebra == Algebra::Control) {
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    return out;
  }
  // With d = wrap(y - x), e^{i pi x} + e^{i pi y} = 2 cos(pi d / 2) e^{i pi (x + d / 2)}
  // and cos(pi d / 2) > 0 except at the antipodal point d = -1.
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a.data()[i];
    const double d = wrap_phase(double(b.data()[i]) - x);
    out.data()[i] = static_cast<T>(d == -1.0 ? 0.0 : wrap_phase(x + 0.5 * d));
  }
  if constexpr (std::is_same_v<T, float>) wrap_phases(out.flat());
  return out;
}

template Matrix<float> fuse(const Matrix<float>&, const Matrix<float>&, Algebra);
template Matrix<double> fuse(const Matrix<double>&, const Matrix<double>&, Algebra);

Symbol fuse(const Symbol& a, const Symbol& b) { return bundle(a, b); }

void to_symbol_domain(Matrix<float>& m, Algebra algebra) {
  if (algebra == Algebra::Fhrr) wrap_phases(m.flat());
}

BridgeNetwork::BridgeNetwork(NetConfig cfg, FeatureExtractor extractor,
                             ImageVectorizer image_vectorizer, LabelVectorizer label_vectorizer,
                             Channel<float> image, Channel<float> label)
    : image_channel(std::move(image)),
      label_channel(std::move(label)),
      cfg_(cfg),
      extractor_(std::move(extractor)),
      image_vec_(std::move(image_vectorizer)),
      label_vec_(std::move(label_vectorizer)) {
  require(image_vec_.dim() == cfg_.dim && label_vec_.dim() == cfg_.dim,
          "BridgeNetwork: vectorizer dim does not match config");
  require(image_vec_.feature_width() == extractor_.width(),
          "BridgeNetwork: vectorizer width does not match extractor");
  require(image_vec_.algebra() == cfg_.algebra && label_vec_.algebra() == cfg_.algebra,
          "BridgeNetwork: algebra mismatch");
  for (const auto* b : {&image_channel.forward, &image_channel.reverse, &label_channel.forward,
                        &label_channel.reverse})
    require(b->dim() == cfg_.dim, "BridgeNetwork: channel dim does not match config");
  initial_image_channel = image_channel;
  initial_label_channel = label_channel;
}

BridgeNetwork BridgeNetwork::create(const NetConfig& cfg, FeatureExtractor extractor,
                                    const Matrix<float>& calibration_features) {
  require(cfg.dim >= 1, "dim must be >= 1");
  auto cb_rng = derive_rng(cfg.seed, kCodebookStream);
  auto codebook = Codebook::random(cfg.num_classes, cfg.dim, cb_rng, cfg.algebra);
  auto proj_rng = derive_rng(cfg.seed, kProjectionStream);
  auto iv = ImageVectorizer::fit(calibration_features, cfg.dim, proj_rng, cfg.algebra);
  auto img_rng = derive_rng(cfg.seed, kImageChannelStream);
  auto lbl_rng = derive_rng(cfg.seed, kLabelChannelStream);
  auto ic = channel_init<float>(img_rng, cfg.dim, cfg.hidden_width(), cfg.output_init_scale);
  auto lc = channel_init<float>(lbl_rng, cfg.dim, cfg.hidden_width(), cfg.output_init_scale);
  return BridgeNetwork(cfg, std::move(extractor), std::move(iv),
                       LabelVectorizer(std::move(codebook), cfg.noise_sigma), std::move(ic),
                       std::move(lc));
}

Matrix<float> BridgeNetwork::image_symbols(const Dataset& ds, std::span<const std::size_t> idx) const {
  return image_vec_.encode(extractor_.extract(ds, idx));
}

Matrix<float> BridgeNetwork::label_symbols(std::span<const std::uint8_t> labels) const {
  return label_vec_.encode_clean(labels);
}

Prediction BridgeNetwork::classify_symbols(const Matrix<float>& s) const {
  Prediction p;
  p.labels.reserve(s.rows());
  p.scores.reserve(s.rows());
  std::vector<double> q(dim());
  for (std::size_t start = 0; start < s.rows(); start += kInferenceChunk) {
    const std::size_t n = std::min(kInferenceChunk, s.rows() - start);
    const auto x = row_chunk(s, start, n);
    auto l = block_forward(label_channel.reverse, block_forward(image_channel.forward, x));
    to_symbol_domain(l, algebra());
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = l.row(i);
      std::copy(r.begin(), r.end(), q.begin());
      auto c = codebook().cleanup(q);
      p.labels.push_back(c.label);
      p.scores.push_back(std::move(c.scores));
    }
  }
  return p;
}

Prediction BridgeNetwork::classify(const Dataset& ds, std::span<const std::size_t> idx) const {
  return classify_symbols(image_symbols(ds, idx));
}

double BridgeNetwork::accuracy(const Dataset& ds, std::span<const std::size_t> idx) const {
  const auto p = classify(ds, idx);
  if (p.labels.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    const std::size_t row = idx.empty() ? i : idx[i];
    hit += p.labels[i] == ds.labels[row];
  }
  return double(hit) / double(p.labels.size());
}

Matrix<float> BridgeNetwork::generate(std::span<const std::size_t> labels, Rng& rng,
                                      std::optional<double> sigma) const {
  if (!extractor_.invertible())
    throw InvalidArgument("inverse unavailable: generation requires an invertible extractor");
  const double sd = sigma.value_or(label_vec_.noise_sigma());
  Matrix<float> sl(labels.size(), dim());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto v = label_vec_.encode(labels[i], rng, sd);
    std::copy(v.begin(), v.end(), sl.row(i).begin());
  }
  auto si = block_forward(image_channel.reverse, block_forward(label_channel.forward, sl));
  to_symbol_domain(si, algebra());
  return extractor_.invert(image_vec_.decode(si));
}

ChannelOptimizers make_optimizers(BridgeNetwork& net, const AdamConfig& cfg) {
  const auto ip = channel_parameters(net.image_channel, "image");
  const auto lp = channel_parameters(net.label_channel, "label");
  return {adam_init<float>(cfg, ip), adam_init<float>(cfg, lp)};
}

EpochMetrics train_symbol_epoch(BridgeNetwork& net, const Matrix<float>& image_symbols,
                                const Matrix<float>& label_symbols, ChannelOptimizers& opt,
                                Rng& rng, std::size_t batch, std::size_t epoch) {
  if (image_symbols.rows() != label_symbols.rows())
    throw InvalidArgument("train: image and label symbol lists are misaligned (" +
                          std::to_string(image_symbols.rows()) + " vs " +
                          std::to_string(label_symbols.rows()) + ")");
  require(image_symbols.rows() > 0, "train: empty training set");
  require(batch >= 1, "train: batch size must be >= 1");
  require(image_symbols.cols() == net.dim() && label_symbols.cols() == net.dim(),
          "train: symbol dim does not match network");
  const std::size_t n = image_symbols.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  EpochMetrics m;
  m.epoch = epoch;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < n; start += batch, ++batches) {
    const auto idx = std::span<const std::size_t>(order).subspan(start, std::min(batch, n - start));
    const auto si = gather_rows(image_symbols, idx);
    const auto sl = gather_rows(label_symbols, idx);
    const auto sf = fuse(si, sl, net.algebra());
    const auto li = step_channel(net.image_channel, "image", opt.image, si, sf, net.algebra(),
                                 epoch, batches);
    const auto ll = step_channel(net.label_channel, "label", opt.label, sl, sf, net.algebra(),
                                 epoch, batches);
    m.image.fwd += li.fwd;
    m.image.rev += li.rev;
    m.label.fwd += ll.fwd;
    m.label.rev += ll.rev;
  }
  const double inv = 1.0 / double(batches);
  m.image.fwd *= inv;
  m.image.rev *= inv;
  m.label.fwd *= inv;
  m.label.rev *= inv;
  return m;
}

EpochMetrics train_epoch(BridgeNetwork& net, const Dataset& ds, ChannelOptimizers& opt, Rng& rng,
                         std::size_t batch, std::size_t epoch) {
  require(ds.size() > 0, "train: empty dataset");
  return train_symbol_epoch(net, net.image_symbols(ds), net.label_symbols(ds.labels), opt, rng,
                            batch, epoch);
}

std::vector<EpochMetrics> train_on_symbol_pairs(BridgeNetwork& net,
                                                const Matrix<float>& image_symbols,
                                                const Matrix<float>& label_symbols,
                                                const TrainOptions& opt, Rng& rng,
                                                const Dataset* test_set) {
  auto optimizers = make_optimizers(net, opt.adam);
  std::vector<EpochMetrics> out;
  for (std::size_t e = 0; e < opt.epochs; ++e) {
    auto m = train_symbol_epoch(net, image_symbols, label_symbols, optimizers, rng, opt.batch,
                                e + 1);
    if (test_set != nullptr && (opt.evaluate_each_epoch || e + 1 == opt.epochs))
      m.test_accuracy = net.accuracy(*test_set);
    out.push_back(m);
  }
  return out;
}

std::vector<EpochMetrics> train(BridgeNetwork& net, const Dataset& train_set,
                                const Dataset* test_set, const TrainOptions& opt) {
  require(train_set.size() > 0, "train: empty dataset");
  const auto si = net.image_symbols(train_set);
  const auto sl = net.label_symbols(train_set.labels);
  auto rng = derive_rng(net.config().seed, kShuffleStream);
  return train_on_symbol_pairs(net, si, sl, opt, rng, test_set);
}

// ---- loop loss --------------------------------------------------------------------

namespace {

template <class T>
void channel_loop(const Channel<T>& c, const Matrix<T>& s, LoopLoss<T>& acc) {
  BlockCache<T> cr, cf;
  const auto r = block_forward(c.reverse, s, &cr);
  const auto y = block_forward(c.forward, r, &cf);
  auto l = phase_loss(y, s);
  // phase_loss returns the gradient of the batch mean; undo the 1/rows.
  const T rows = static_cast<T>(s.rows());
  for (auto& g : l.grad.flat()) g *= rows;
  const auto dr = block_backward<T>(c.forward, cf, l.grad, nullptr);
  const auto ds = block_backward<T>(c.reverse, cr, dr, nullptr);
  for (std::size_t i = 0; i < s.rows(); ++i) acc.rows[i] += l.rows[i];
  for (std::size_t k = 0; k < ds.size(); ++k)
    acc.grad.data()[k] += ds.data()[k] - l.grad.data()[k];
}

}  // namespace

template <class T>
LoopLoss<T> loop_loss(const Channel<T>& image, const Channel<T>& label, const Matrix<T>& s) {
  require(s.rows() >= 1, "loop_loss: no symbols");
  require(s.cols() == image.forward.dim() && s.cols() == label.forward.dim(),
          "loop_loss: symbol dim does not match channels");
  LoopLoss<T> out;
  out.rows.assign(s.rows(), 0.0);
  out.grad = Matrix<T>(s.rows(), s.cols());
  channel_loop(image, s, out);
  channel_loop(label, s, out);
  out.value = std::accumulate(out.rows.begin(), out.rows.end(), 0.0) / double(s.rows());
  return out;
}

template LoopLoss<float> loop_loss(const Channel<float>&, const Channel<float>&,
                                   const Matrix<float>&);
template LoopLoss<double> loop_loss(const Channel<double>&, const Channel<double>&,
                                    const Matrix<double>&);

DistilledSet distill(const BridgeNetwork& net, const DistillOptions& opt, Rng& rng) {
  if (opt.count == 0) throw InvalidArgument("distill: count must be >= 1");
  if (net.algebra() != Algebra::Fhrr)
    throw InvalidArgument("distill: loop loss is defined for the FHRR algebra only");
  const std::size_t n = opt.count, dim = net.dim();
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix<float> s(n, dim);
  for (auto& v : s.flat()) v = static_cast<float>(u(rng));
  wrap_phases(s.flat());

  AdamConfig acfg;
  acfg.lr = opt.step_size;
  const std::vector<TensorRef<float>> params{{"distilled symbols", s.flat()}};
  auto state = adam_init<float>(acfg, params);

  DistilledSet d;
  Matrix<float> best = s;
  std::vector<double> best_loss;
  for (std::size_t step = 0;; ++step) {
    const auto l = loop_loss(net.image_channel, net.label_channel, s);
    if (step == 0) {
      d.initial_losses = l.rows;
      best_loss = l.rows;
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        if (l.rows[i] < best_loss[i]) {
          best_loss[i] = l.rows[i];
          std::copy(s.row(i).begin(), s.row(i).end(), best.row(i).begin());
        }
      }
    }
    d.history.push_back(std::accumulate(best_loss.begin(), best_loss.end(), 0.0) / double(n));
    if (step == opt.steps) break;
    const std::span<const float> grads[] = {l.grad.flat()};
    adam_step<float>(params, grads, state);
  }
  wrap_phases(best.flat());
  d.fused = best;
  d.image_symbols = block_forward(net.image_channel.reverse, best);
  d.label_symbols = block_forward(net.label_channel.reverse, best);
  wrap_phases(d.image_symbols.flat());
  wrap_phases(d.label_symbols.flat());
  d.loop_losses = std::move(best_loss);
  return d;
}

BridgeNetwork make_student(const BridgeNetwork& teacher, bool shared_init, std::uint64_t init_seed) {
  BridgeNetwork s = teacher;
  if (shared_init) {
    s.image_channel = teacher.initial_image_channel;
    s.label_channel = teacher.initial_label_channel;
  } else {
    const auto& c = teacher.config();
    auto ir = derive_rng(init_seed, kImageChannelStream);
    auto lr = derive_rng(init_seed, kLabelChannelStream);
    s.image_channel = channel_init<float>(ir, c.dim, c.hidden_width(), c.output_init_scale);
    s.label_channel = channel_init<float>(lr, c.dim, c.hidden_width(), c.output_init_scale);
  }
  s.initial_image_channel = s.image_channel;
  s.initial_label_channel = s.label_channel;
  return s;
}

}  // namespace bridge
