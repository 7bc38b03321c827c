#pragma once

// The two-block Bridge network. An image block and a label block each own a
// channel (forward + reverse residual block). Both blocks learn to predict the
// fused symbol, the bundle of the image symbol and the label symbol, using only
// their own local loss.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bridge/features.hpp"
#include "bridge/nn.hpp"
#include "bridge/vectorizers.hpp"

namespace bridge {

template <class T>
struct Channel {
  ResidualBlock<T> forward;   // adds the other block's expected information
  ResidualBlock<T> reverse;   // removes it
};

template <class T>
Channel<T> channel_init(Rng& rng, std::size_t dim, std::size_t hidden,
                        double output_scale = kOutputInitScale) {
  Channel<T> c;
  c.forward = block_init<T>(rng, dim, hidden, output_scale);
  c.reverse = block_init<T>(rng, dim, hidden, output_scale);
  return c;
}

template <class To, class From>
Channel<To> cast_channel(const Channel<From>& c) {
  return {cast_block<To>(c.forward), cast_block<To>(c.reverse)};
}

struct NetConfig {
  std::size_t dim = 1024;
  std::size_t hidden = 0;  // 0 means dim
  Algebra algebra = Algebra::Fhrr;
  std::size_t num_classes = 10;
  double noise_sigma = 0.05;
  double output_init_scale = kOutputInitScale;
  std::uint64_t seed = 1;

  std::size_t hidden_width() const noexcept { return hidden == 0 ? dim : hidden; }
};

struct ChannelLosses {
  double fwd = 0.0;
  double rev = 0.0;
  double total() const noexcept { return fwd + rev; }
};

struct EpochMetrics {
  std::size_t epoch = 0;
  ChannelLosses image;
  ChannelLosses label;
  std::optional<double> test_accuracy;
  double mean_channel_loss() const noexcept { return 0.5 * (image.total() + label.total()); }
};

struct Prediction {
  std::vector<std::size_t> labels;
  std::vector<std::vector<double>> scores;
};

class BridgeNetwork {
 public:
  BridgeNetwork() = default;
  BridgeNetwork(NetConfig cfg, FeatureExtractor extractor, ImageVectorizer image_vectorizer,
                LabelVectorizer label_vectorizer, Channel<float> image, Channel<float> label);

  // Draws the codebook, fits the vectorizer on calibration_features and
  // initializes both channels, all from cfg.seed.
  static BridgeNetwork create(const NetConfig& cfg, FeatureExtractor extractor,
                              const Matrix<float>& calibration_features);

  const NetConfig& config() const noexcept { return cfg_; }
  std::size_t dim() const noexcept { return cfg_.dim; }
  Algebra algebra() const noexcept { return cfg_.algebra; }
  const FeatureExtractor& extractor() const noexcept { return extractor_; }
  const ImageVectorizer& image_vectorizer() const noexcept { return image_vec_; }
  const LabelVectorizer& label_vectorizer() const noexcept { return label_vec_; }
  const Codebook& codebook() const noexcept { return label_vec_.codebook(); }

  Channel<float> image_channel;
  Channel<float> label_channel;
  // Channel weights as they were before any training.
  Channel<float> initial_image_channel;
  Channel<float> initial_label_channel;

  // Symbol rows for dataset samples (all rows when idx is empty).
  Matrix<float> image_symbols(const Dataset& ds, std::span<const std::size_t> idx = {}) const;
  Matrix<float> label_symbols(std::span<const std::uint8_t> labels) const;

  Prediction classify(const Dataset& ds, std::span<const std::size_t> idx = {}) const;
  Prediction classify_symbols(const Matrix<float>& image_symbols) const;
  double accuracy(const Dataset& ds, std::span<const std::size_t> idx = {}) const;

  // Images for the given labels; noise follows the label vectorizer unless sigma is set.
  Matrix<float> generate(std::span<const std::size_t> labels, Rng& rng,
                         std::optional<double> sigma = std::nullopt) const;

 private:
  NetConfig cfg_;
  FeatureExtractor extractor_;
  ImageVectorizer image_vec_;
  LabelVectorizer label_vec_;
};

// FHRR: per-element 2-bundle; control: elementwise sum.
template <class T>
Matrix<T> fuse(const Matrix<T>& a, const Matrix<T>& b, Algebra algebra);
Symbol fuse(const Symbol& a, const Symbol& b);

// Applies the algebra's boundary map to raw channel outputs: phase wrapping for
// FHRR, nothing for control.
void to_symbol_domain(Matrix<float>& m, Algebra algebra);

struct ChannelOptimizers {
  AdamState<float> image;
  AdamState<float> label;
};

ChannelOptimizers make_optimizers(BridgeNetwork& net, const AdamConfig& cfg = {});

// One pass over aligned symbol pairs in seed-shuffled batches. Each channel
// is updated from its own forward + reverse loss only.
EpochMetrics train_symbol_epoch(BridgeNetwork& net, const Matrix<float>& image_symbols,
                                const Matrix<float>& label_symbols, ChannelOptimizers& opt,
                                Rng& rng, std::size_t batch = 64, std::size_t epoch = 0);

// Encodes the dataset (frozen extractor and vectorizers) and runs one epoch.
EpochMetrics train_epoch(BridgeNetwork& net, const Dataset& ds, ChannelOptimizers& opt, Rng& rng,
                         std::size_t batch = 64, std::size_t epoch = 0);

struct TrainOptions {
  std::size_t epochs = 5;
  std::size_t batch = 64;
  AdamConfig adam;
  bool evaluate_each_epoch = true;
};

// Full run: encodes once, trains for the given epochs, optionally scores the
// test set after each epoch. Shuffling uses a stream derived from the net seed.
std::vector<EpochMetrics> train(BridgeNetwork& net, const Dataset& train_set,
                                const Dataset* test_set, const TrainOptions& opt);

std::vector<EpochMetrics> train_on_symbol_pairs(BridgeNetwork& net,
                                                const Matrix<float>& image_symbols,
                                                const Matrix<float>& label_symbols,
                                                const TrainOptions& opt, Rng& rng,
                                                const Dataset* test_set = nullptr);

// ---- loop loss and distillation ------------------------------------------------

template <class T>
struct LoopLoss {
  std::vector<double> rows;  // per-row loop loss
  double value = 0.0;        // mean of rows
  Matrix<T> grad;            // row i holds d rows[i] / d s_i
};

// rows[i] = L(fwd_i(rev_i(s_i)), s_i) + L(fwd_l(rev_l(s_i)), s_i) with the
// phase loss; the gradient includes the dependence of the target on s.
template <class T>
LoopLoss<T> loop_loss(const Channel<T>& image, const Channel<T>& label, const Matrix<T>& s);

struct DistilledSet {
  Matrix<float> fused;
  Matrix<float> image_symbols;
  Matrix<float> label_symbols;
  std::vector<double> loop_losses;
  std::vector<double> initial_losses;
  std::vector<double> history;  // mean best-so-far loss after each step
  std::size_t size() const noexcept { return fused.rows(); }
};

struct DistillOptions {
  std::size_t count = 512;
  std::size_t steps = 200;
  double step_size = 0.01;
};

DistilledSet distill(const BridgeNetwork& net, const DistillOptions& opt, Rng& rng);

// A student sharing the teacher's extractor, vectorizers and codebook. Channels
// start from the teacher's initial weights or from a fresh draw with init_seed.
BridgeNetwork make_student(const BridgeNetwork& teacher, bool shared_init,
                           std::uint64_t init_seed);

}  // namespace bridge
