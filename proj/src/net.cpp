#include "edgelab/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numeric>

#include "json.hpp"

#include "edgelab/errors.hpp"
#include "edgelab/parallel.hpp"
#include "edgelab/pgm.hpp"

namespace edgelab::net {

namespace {

inline int clamp_idx(int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); }

inline size_t at3(int ch, int r, int c, int h, int w) {
  return (static_cast<size_t>(ch) * h + r) * w + c;
}

// Same-size 3x3 convolution with edge-replication padding; optionally fused
// ReLU. Weight layout: ((o * in_ch + i) * 3 + kr) * 3 + kc.
void conv3x3_forward(const double* in, int in_ch, double* out, int out_ch,
                     int h, int w, const double* wt, const double* bias,
                     bool relu) {
  for (int o = 0; o < out_ch; ++o) {
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        double sum = bias[o];
        for (int i = 0; i < in_ch; ++i) {
          const double* wk = wt + (static_cast<size_t>(o) * in_ch + i) * 9;
          for (int kr = 0; kr < 3; ++kr) {
            const int rr = clamp_idx(r + kr - 1, h - 1);
            for (int kc = 0; kc < 3; ++kc) {
              const int cc = clamp_idx(c + kc - 1, w - 1);
              sum += wk[kr * 3 + kc] * in[at3(i, rr, cc, h, w)];
            }
          }
        }
        if (relu && sum < 0.0) sum = 0.0;
        out[at3(o, r, c, h, w)] = sum;
      }
    }
  }
}

// Adjoint of conv3x3_forward for the pre-activation gradient gz. The
// replicate padding's adjoint scatters into the same clamped positions the
// forward read from.
void conv3x3_backward(const double* in, int in_ch, const double* gz,
                      int out_ch, int h, int w, const double* wt, double* gw,
                      double* gb, double* gin) {
  for (int o = 0; o < out_ch; ++o) {
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const double g = gz[at3(o, r, c, h, w)];
        if (g == 0.0) continue;
        gb[o] += g;
        for (int i = 0; i < in_ch; ++i) {
          const size_t wbase = (static_cast<size_t>(o) * in_ch + i) * 9;
          for (int kr = 0; kr < 3; ++kr) {
            const int rr = clamp_idx(r + kr - 1, h - 1);
            for (int kc = 0; kc < 3; ++kc) {
              const int cc = clamp_idx(c + kc - 1, w - 1);
              const size_t iidx = at3(i, rr, cc, h, w);
              gw[wbase + kr * 3 + kc] += g * in[iidx];
              if (gin) gin[iidx] += wt[wbase + kr * 3 + kc] * g;
            }
          }
        }
      }
    }
  }
}

}  // namespace

TinyNet TinyNet::initialized(Xoshiro256pp& rng) {
  TinyNet net;
  const struct {
    int offset;
    int count;
    int fan_in;
  } blocks[] = {
      {kW1, kChannels * 9, 9},
      {kW2, kChannels * kChannels * 9, kChannels * 9},
      {kW3, kChannels, kChannels},
  };
  for (const auto& blk : blocks) {
    const double bound = std::sqrt(6.0 / blk.fan_in);
    for (int k = 0; k < blk.count; ++k) {
      net.params[static_cast<size_t>(blk.offset + k)] =
          rng.uniform(-bound, bound);
    }
  }
  return net;
}

TinyNet TinyNet::initialized(uint64_t seed) {
  Xoshiro256pp rng(seed);
  return initialized(rng);
}

void TinyNet::forward(const SoftMap& image, Trace& trace) const {
  const int h = image.height;
  const int w = image.width;
  const size_t plane = static_cast<size_t>(h) * w;

  trace.input = image;
  trace.a1.assign(kChannels * plane, 0.0);
  trace.a2.assign(kChannels * plane, 0.0);
  trace.output = SoftMap(h, w, 0.0);

  conv3x3_forward(image.data.data(), 1, trace.a1.data(), kChannels, h, w,
                  params.data() + kW1, params.data() + kB1, true);
  conv3x3_forward(trace.a1.data(), kChannels, trace.a2.data(), kChannels, h, w,
                  params.data() + kW2, params.data() + kB2, true);

  const double* w3 = params.data() + kW3;
  const double b3 = params[kB3];
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double z = b3;
      for (int i = 0; i < kChannels; ++i) z += w3[i] * trace.a2[at3(i, r, c, h, w)];
      trace.output.at(r, c) = 1.0 / (1.0 + std::exp(-z));
    }
  }
}

SoftMap TinyNet::forward(const SoftMap& image) const {
  Trace trace;
  forward(image, trace);
  return trace.output;
}

std::vector<double> TinyNet::backward(const Trace& trace,
                                      const Grid<double>& output_grad) const {
  require_same_shape(trace.output, output_grad, "backward");
  const int h = trace.output.height;
  const int w = trace.output.width;
  const size_t plane = static_cast<size_t>(h) * w;

  std::vector<double> grads(kParamCount, 0.0);
  std::vector<double> ga2(kChannels * plane, 0.0);
  std::vector<double> gz2(kChannels * plane, 0.0);
  std::vector<double> ga1(kChannels * plane, 0.0);
  std::vector<double> gz1(kChannels * plane, 0.0);

  // Head: sigmoid then the 1x1 convolution.
  const double* w3 = params.data() + kW3;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double y = trace.output.at(r, c);
      const double gz3 = output_grad.at(r, c) * y * (1.0 - y);
      if (gz3 == 0.0) continue;
      grads[kB3] += gz3;
      for (int i = 0; i < kChannels; ++i) {
        const size_t idx = at3(i, r, c, h, w);
        grads[static_cast<size_t>(kW3 + i)] += gz3 * trace.a2[idx];
        ga2[idx] += w3[i] * gz3;
      }
    }
  }

  // ReLU masks: an activation of exactly zero was clipped, gradient zero.
  for (size_t i = 0; i < ga2.size(); ++i) {
    gz2[i] = trace.a2[i] > 0.0 ? ga2[i] : 0.0;
  }
  conv3x3_backward(trace.a1.data(), kChannels, gz2.data(), kChannels, h, w,
                   params.data() + kW2, grads.data() + kW2, grads.data() + kB2,
                   ga1.data());

  for (size_t i = 0; i < ga1.size(); ++i) {
    gz1[i] = trace.a1[i] > 0.0 ? ga1[i] : 0.0;
  }
  conv3x3_backward(trace.input.data.data(), 1, gz1.data(), kChannels, h, w,
                   params.data() + kW1, grads.data() + kW1, grads.data() + kB1,
                   nullptr);

  return grads;
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "wbce") return LossKind::WBCE;
  if (name == "swbce") return LossKind::SWBCE;
  throw InvalidConfig("unknown loss '" + name + "' (expected wbce|swbce)");
}

std::string loss_kind_to_string(LossKind k) {
  return k == LossKind::WBCE ? "wbce" : "swbce";
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidConfig("learning_rate must be > 0");
  if (weight_decay < 0.0) throw InvalidConfig("weight_decay must be >= 0");
  if (epochs < 1) throw InvalidConfig("epochs must be >= 1");
  if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
  if ((crop_h > 0) != (crop_w > 0)) {
    throw InvalidConfig("crop height and width must be set together");
  }
  if (crop_h < 0 || crop_w < 0) throw InvalidConfig("crop must be >= 0");
  loss.validate();
}

namespace {

constexpr char kCheckpointMagic[8] = {'E', 'D', 'L', 'B',
                                      'C', 'K', 'P', 'T'};
constexpr uint32_t kCheckpointVersion = 1;

void put_u8(std::ostream& out, uint8_t v) {
  out.put(static_cast<char>(v));
}

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  put_u64(out, bits);
}

uint8_t get_u8(std::istream& in) {
  const int c = in.get();
  if (c == EOF) throw TruncatedData("checkpoint cut short");
  return static_cast<uint8_t>(c);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw TruncatedData("checkpoint cut short");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (in.gcount() != 8) throw TruncatedData("checkpoint cut short");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  const uint64_t bits = get_u64(in);
  double d;
  std::memcpy(&d, &bits, sizeof(d));
  return d;
}

void put_tensor(std::ostream& out, const char* name,
                const std::vector<double>& data) {
  const size_t len = std::strlen(name);
  put_u8(out, static_cast<uint8_t>(len));
  out.write(name, static_cast<std::streamsize>(len));
  put_u8(out, 1);  // ndim
  put_u64(out, data.size());
  for (double v : data) put_f64(out, v);
}

std::vector<double> get_tensor(std::istream& in, const char* expect_name,
                               size_t expect_size) {
  const uint8_t len = get_u8(in);
  std::string name(len, '\0');
  in.read(name.data(), len);
  if (in.gcount() != len) throw TruncatedData("checkpoint cut short");
  if (name != expect_name) {
    throw MalformedHeader("checkpoint tensor '" + name + "', expected '" +
                          expect_name + "'");
  }
  const uint8_t ndim = get_u8(in);
  if (ndim != 1) throw MalformedHeader("checkpoint tensor rank != 1");
  const uint64_t n = get_u64(in);
  if (n != expect_size) {
    throw MalformedHeader("checkpoint tensor '" + name + "' has " +
                          std::to_string(n) + " values, expected " +
                          std::to_string(expect_size));
  }
  std::vector<double> data(n);
  for (uint64_t i = 0; i < n; ++i) data[i] = get_f64(in);
  return data;
}

}  // namespace

// Checkpoint file layout, all integers and IEEE-754 doubles little-endian:
//   magic "EDLBCKPT" | u32 version
//   u32 tensor_count, then per tensor:
//     u8 name_len, name, u8 ndim, u64 dims[ndim], f64 values
//   (tensors, in order: params, adam_m, adam_v)
//   u64 adam_step_count | u64 epochs_completed | u64 rng_state[4]
//   u64 history_len | f64 history[history_len]
void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot write " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, 3);
  put_tensor(out, "params", params);
  put_tensor(out, "adam_m", adam.m);
  put_tensor(out, "adam_v", adam.v);
  put_u64(out, adam.t);
  put_u64(out, epoch);
  for (uint64_t s : rng_state) put_u64(out, s);
  put_u64(out, history.size());
  for (double v : history) put_f64(out, v);
  if (!out) throw IoFailure("write failed: " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw MalformedHeader("not a checkpoint file: " + path.string());
  }
  const uint32_t version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw MalformedHeader("unsupported checkpoint version " +
                          std::to_string(version));
  }
  const uint32_t tensor_count = get_u32(in);
  if (tensor_count != 3) {
    throw MalformedHeader("expected 3 tensors, found " +
                          std::to_string(tensor_count));
  }

  Checkpoint ckpt;
  const size_t n = TinyNet::kParamCount;
  ckpt.params = get_tensor(in, "params", n);
  ckpt.adam.m = get_tensor(in, "adam_m", n);
  ckpt.adam.v = get_tensor(in, "adam_v", n);
  ckpt.adam.t = get_u64(in);
  ckpt.epoch = get_u64(in);
  for (auto& s : ckpt.rng_state) s = get_u64(in);
  const uint64_t hist_len = get_u64(in);
  ckpt.history.resize(hist_len);
  for (auto& v : ckpt.history) v = get_f64(in);
  return ckpt;
}

std::vector<TrainSample> load_split(const std::filesystem::path& dataset_dir,
                                    const std::string& split) {
  const auto manifest_path = dataset_dir / "manifest.json";
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoFailure("bad manifest " + manifest_path.string() + ": " +
                    e.what());
  }

  std::vector<TrainSample> samples;
  try {
    for (const auto& entry : manifest.at("samples")) {
      if (entry.at("split").get<std::string>() != split) continue;
      TrainSample s;
      s.image = io::read_soft(dataset_dir / entry.at("image").get<std::string>());
      s.edges =
          io::read_binary(dataset_dir / entry.at("edges").get<std::string>());
      samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoFailure("bad manifest " + manifest_path.string() + ": " +
                    e.what());
  }
  return samples;
}

Trainer::Trainer(std::vector<TrainSample> data, const TrainConfig& cfg)
    : data_(std::move(data)), cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate();
  if (data_.empty()) throw InvalidConfig("training set is empty");
  cfg_.loss.normalization = loss::Normalization::PerPixelMean;
  net_ = TinyNet::initialized(rng_);
  adam_.m.assign(TinyNet::kParamCount, 0.0);
  adam_.v.assign(TinyNet::kParamCount, 0.0);
}

Trainer::Trainer(std::vector<TrainSample> data, const TrainConfig& cfg,
                 const Checkpoint& resume)
    : Trainer(std::move(data), cfg) {
  if (resume.params.size() != TinyNet::kParamCount) {
    throw InvalidConfig("checkpoint does not match the network");
  }
  net_.params = resume.params;
  adam_ = resume.adam;
  epoch_ = resume.epoch;
  history_ = resume.history;
  rng_.set_state(resume.rng_state.data());
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.params = net_.params;
  ckpt.adam = adam_;
  ckpt.epoch = epoch_;
  const uint64_t* s = rng_.state();
  std::copy(s, s + 4, ckpt.rng_state.begin());
  ckpt.history = history_;
  return ckpt;
}

void Trainer::run_epochs(int n) {
  for (int e = 0; e < n; ++e) {
    history_.push_back(train_epoch());
    ++epoch_;
  }
}

double Trainer::train_epoch() {
  const int n = static_cast<int>(data_.size());
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng_.shuffle(order);

  const auto loss_fn = cfg_.loss_kind == LossKind::WBCE ? loss::label_loss
                                                        : loss::swbce_loss;

  double epoch_loss = 0.0;
  for (int start = 0; start < n; start += cfg_.batch_size) {
    const int bn = std::min(cfg_.batch_size, n - start);

    // Crop offsets come off the shared stream sequentially, before the
    // parallel section, so thread count cannot perturb the random sequence.
    struct Item {
      const TrainSample* sample;
      int r0 = 0, c0 = 0, h = 0, w = 0;
    };
    std::vector<Item> items(static_cast<size_t>(bn));
    for (int k = 0; k < bn; ++k) {
      Item& it = items[static_cast<size_t>(k)];
      it.sample = &data_[static_cast<size_t>(order[static_cast<size_t>(start + k)])];
      const int ih = it.sample->image.height;
      const int iw = it.sample->image.width;
      it.h = cfg_.crop_h > 0 ? std::min(cfg_.crop_h, ih) : ih;
      it.w = cfg_.crop_w > 0 ? std::min(cfg_.crop_w, iw) : iw;
      it.r0 = it.h < ih ? rng_.range(0, ih - it.h) : 0;
      it.c0 = it.w < iw ? rng_.range(0, iw - it.w) : 0;
    }

    std::vector<std::vector<double>> grads(static_cast<size_t>(bn));
    std::vector<double> losses(static_cast<size_t>(bn), 0.0);
    parallel_for(bn, cfg_.threads, [&](int k) {
      const Item& it = items[static_cast<size_t>(k)];
      SoftMap img(it.h, it.w, 0.0);
      BinaryMap gt(it.h, it.w, 0);
      for (int r = 0; r < it.h; ++r) {
        for (int c = 0; c < it.w; ++c) {
          img.at(r, c) = it.sample->image.at(it.r0 + r, it.c0 + c);
          gt.at(r, c) = it.sample->edges.at(it.r0 + r, it.c0 + c);
        }
      }
      TinyNet::Trace trace;
      net_.forward(img, trace);
      const loss::LossResult res = loss_fn(trace.output, gt, cfg_.loss);
      losses[static_cast<size_t>(k)] = res.value;
      grads[static_cast<size_t>(k)] = net_.backward(trace, res.gradient);
    });

    std::vector<double> grad(TinyNet::kParamCount, 0.0);
    for (int k = 0; k < bn; ++k) {
      if (!std::isfinite(losses[static_cast<size_t>(k)])) {
        throw NonFiniteLoss(
            "loss became non-finite at epoch " + std::to_string(epoch_ + 1) +
            ", batch starting at sample " + std::to_string(start) +
            " (value " + std::to_string(losses[static_cast<size_t>(k)]) + ")");
      }
      epoch_loss += losses[static_cast<size_t>(k)];
      const std::vector<double>& g = grads[static_cast<size_t>(k)];
      for (int p = 0; p < TinyNet::kParamCount; ++p) grad[static_cast<size_t>(p)] += g[static_cast<size_t>(p)];
    }
    const double inv = 1.0 / bn;
    for (double& g : grad) g *= inv;

    // Adam with decoupled weight decay.
    ++adam_.t;
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam_.t));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam_.t));
    for (size_t p = 0; p < grad.size(); ++p) {
      adam_.m[p] = kBeta1 * adam_.m[p] + (1.0 - kBeta1) * grad[p];
      adam_.v[p] = kBeta2 * adam_.v[p] + (1.0 - kBeta2) * grad[p] * grad[p];
      const double mhat = adam_.m[p] / bc1;
      const double vhat = adam_.v[p] / bc2;
      net_.params[p] -= cfg_.learning_rate *
                        (mhat / (std::sqrt(vhat) + kEps) +
                         cfg_.weight_decay * net_.params[p]);
    }
  }
  return epoch_loss / n;
}

void write_history_csv(const std::vector<double>& history,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot write " + path.string());
  out << "epoch,mean_loss\n";
  char line[64];
  for (size_t i = 0; i < history.size(); ++i) {
    std::snprintf(line, sizeof(line), "%zu,%.12g\n", i + 1, history[i]);
    out << line;
  }
  if (!out) throw IoFailure("write failed: " + path.string());
}

std::vector<std::string> predict_dir(const TinyNet& net,
                                     const std::filesystem::path& images_dir,
                                     const std::filesystem::path& out_dir,
                                     int threads) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(images_dir)) {
    throw IoFailure("not a directory: " + images_dir.string());
  }
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(images_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
      stems.push_back(entry.path().stem().string());
    }
  }
  std::sort(stems.begin(), stems.end());

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoFailure("cannot create " + out_dir.string());

  std::exception_ptr failure;
  std::mutex failure_mu;
  parallel_for(static_cast<int>(stems.size()), threads, [&](int k) {
    try {
      const std::string& stem = stems[static_cast<size_t>(k)];
      const SoftMap image = io::read_soft(images_dir / (stem + ".pgm"));
      io::write_soft(net.forward(image), out_dir / (stem + ".pgm"), 65535);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mu);
      if (!failure) failure = std::current_exception();
    }
  });
  if (failure) std::rethrow_exception(failure);
  return stems;
}

}  // namespace edgelab::net
