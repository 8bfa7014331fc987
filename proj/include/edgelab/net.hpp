#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "edgelab/grid.hpp"
#include "edgelab/loss.hpp"
#include "edgelab/rng.hpp"

namespace edgelab::net {

// Three-layer per-pixel edge scorer:
//   conv 3x3 (1 -> 8) + ReLU, conv 3x3 (8 -> 8) + ReLU,
//   conv 1x1 (8 -> 1) + sigmoid,
// all convolutions same-size with edge-replication padding, parameters fp64.
// Parameters live in one flat vector with the layout below so the optimizer
// and checkpoints can treat them uniformly.
struct TinyNet {
  static constexpr int kChannels = 8;
  static constexpr int kW1 = 0;                      // 8 x 1 x 3 x 3
  static constexpr int kB1 = kW1 + kChannels * 9;    // 8
  static constexpr int kW2 = kB1 + kChannels;        // 8 x 8 x 3 x 3
  static constexpr int kB2 = kW2 + kChannels * kChannels * 9;
  static constexpr int kW3 = kB2 + kChannels;        // 1 x 8
  static constexpr int kB3 = kW3 + kChannels;        // 1
  static constexpr int kParamCount = kB3 + 1;

  std::vector<double> params;

  TinyNet() : params(kParamCount, 0.0) {}

  // He-uniform fan-in weights drawn from the stream, biases zero.
  static TinyNet initialized(Xoshiro256pp& rng);
  static TinyNet initialized(uint64_t seed);

  // Intermediate activations kept for the backward pass.
  struct Trace {
    SoftMap input;
    std::vector<double> a1;  // kChannels * H * W, post-ReLU
    std::vector<double> a2;
    SoftMap output;
  };

  SoftMap forward(const SoftMap& image) const;
  void forward(const SoftMap& image, Trace& trace) const;

  // Exact dL/dparams for the given dL/doutput, same layout as params.
  std::vector<double> backward(const Trace& trace,
                               const Grid<double>& output_grad) const;
};

enum class LossKind { WBCE, SWBCE };

LossKind loss_kind_from_string(const std::string& name);
std::string loss_kind_to_string(LossKind k);

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-8;
  int epochs = 1;
  int batch_size = 8;
  int crop_h = 0;  // 0 = full image
  int crop_w = 0;
  uint64_t seed = 42;
  LossKind loss_kind = LossKind::SWBCE;
  loss::LossConfig loss;  // normalization is forced to PerPixelMean
  int threads = 0;

  void validate() const;  // throws InvalidConfig
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  uint64_t t = 0;
};

// Everything needed to resume training bit-identically: parameters,
// optimizer moments, the position in the shuffle/crop random stream, and the
// per-epoch loss record.
struct Checkpoint {
  std::vector<double> params;
  AdamState adam;
  uint64_t epoch = 0;
  std::array<uint64_t, 4> rng_state{};
  std::vector<double> history;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

struct TrainSample {
  SoftMap image;
  BinaryMap edges;
};

// Loads one split ("train" or "test") of a generated dataset directory via
// its manifest.json, in manifest order.
std::vector<TrainSample> load_split(const std::filesystem::path& dataset_dir,
                                    const std::string& split);

class Trainer {
 public:
  Trainer(std::vector<TrainSample> data, const TrainConfig& cfg);
  Trainer(std::vector<TrainSample> data, const TrainConfig& cfg,
          const Checkpoint& resume);

  // Mini-batch Adam (beta1 0.9, beta2 0.999, eps 1e-8, decoupled weight
  // decay), one history entry per epoch. Throws NonFiniteLoss before
  // applying any update from a non-finite batch.
  void run_epochs(int n);

  const TinyNet& net() const { return net_; }
  const std::vector<double>& history() const { return history_; }
  uint64_t epoch() const { return epoch_; }
  Checkpoint checkpoint() const;

 private:
  double train_epoch();

  std::vector<TrainSample> data_;
  TrainConfig cfg_;
  TinyNet net_;
  AdamState adam_;
  Xoshiro256pp rng_;
  uint64_t epoch_ = 0;
  std::vector<double> history_;
};

// epoch,mean_loss rows for every entry of the history.
void write_history_csv(const std::vector<double>& history,
                       const std::filesystem::path& path);

// One 16-bit PGM prediction per *.pgm in images_dir, same stems. Returns the
// stems written, sorted.
std::vector<std::string> predict_dir(const TinyNet& net,
                                     const std::filesystem::path& images_dir,
                                     const std::filesystem::path& out_dir,
                                     int threads = 0);

}  // namespace edgelab::net
