#include "rtgan/trainer.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rtgan/frame_tensor.hpp"

namespace rtgan {

static_assert(std::endian::native == std::endian::little, "checkpoints are written in host byte order");

using nlohmann::json;

void TrainConfig::validate() const {
  model.generator.validate();
  model.frame_disc.validate();
  model.temporal_disc.validate();
  LossWeights{lambda_t}.validate();
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (recurrence_horizon != 0 && recurrence_horizon != 1) throw ConfigError("recurrence_horizon must be 0 or 1");
  if (y1_prev_source != "f_x0" && y1_prev_source != "f_x1") throw ConfigError("y1_prev_source must be f_x0 or f_x1");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
  if (triplet_stride < 1) throw ConfigError("triplet_stride must be >= 1");
  if (pool_size < 0) throw ConfigError("pool_size must be >= 0");
}

namespace {

json config_json(const TrainConfig& c) {
  return {
      {"generator", {{"base_width", c.model.generator.base_width}, {"n_res_blocks", c.model.generator.n_res_blocks}}},
      {"frame_disc", {{"base_width", c.model.frame_disc.base_width}, {"n_layers", c.model.frame_disc.n_layers}}},
      {"temporal_disc",
       {{"base_width", c.model.temporal_disc.base_width}, {"n_layers", c.model.temporal_disc.n_layers}}},
      {"lambda_t", c.lambda_t},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"seed", c.seed},
      {"gan_loss", to_string(c.gan_loss)},
      {"recurrence_horizon", c.recurrence_horizon},
      {"y1_prev_source", c.y1_prev_source},
      {"checkpoint_every", c.checkpoint_every},
      {"frame_model_ref", c.frame_model_ref},
      {"x_stream", c.x_stream},
      {"y_stream", c.y_stream},
      {"triplet_stride", c.triplet_stride},
      {"pool_size", c.pool_size},
  };
}

template <typename T>
void read_field(const json& obj, const std::string& key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) out = it->get<T>();
}

void reject_unknown(const json& obj, const json& reference, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!reference.contains(key)) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

}  // namespace

std::string train_config_to_string(const TrainConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

TrainConfig train_config_from_string(const std::string& text) {
  TrainConfig c;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    const json ref = config_json(c);
    reject_unknown(j, ref, "");
    for (const char* net : {"generator", "frame_disc", "temporal_disc"}) {
      if (j.contains(net)) reject_unknown(j.at(net), ref.at(net), std::string(net) + ".");
    }
    if (j.contains("generator")) {
      read_field(j["generator"], "base_width", c.model.generator.base_width);
      read_field(j["generator"], "n_res_blocks", c.model.generator.n_res_blocks);
    }
    if (j.contains("frame_disc")) {
      read_field(j["frame_disc"], "base_width", c.model.frame_disc.base_width);
      read_field(j["frame_disc"], "n_layers", c.model.frame_disc.n_layers);
    }
    if (j.contains("temporal_disc")) {
      read_field(j["temporal_disc"], "base_width", c.model.temporal_disc.base_width);
      read_field(j["temporal_disc"], "n_layers", c.model.temporal_disc.n_layers);
    }
    read_field(j, "lambda_t", c.lambda_t);
    read_field(j, "epochs", c.epochs);
    read_field(j, "batch_size", c.batch_size);
    read_field(j, "learning_rate", c.learning_rate);
    read_field(j, "beta1", c.beta1);
    read_field(j, "beta2", c.beta2);
    read_field(j, "seed", c.seed);
    std::string loss = to_string(c.gan_loss);
    read_field(j, "gan_loss", loss);
    c.gan_loss = parse_gan_loss(loss);
    read_field(j, "recurrence_horizon", c.recurrence_horizon);
    read_field(j, "y1_prev_source", c.y1_prev_source);
    read_field(j, "checkpoint_every", c.checkpoint_every);
    read_field(j, "frame_model_ref", c.frame_model_ref);
    read_field(j, "x_stream", c.x_stream);
    read_field(j, "y_stream", c.y_stream);
    read_field(j, "triplet_stride", c.triplet_stride);
    read_field(j, "pool_size", c.pool_size);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw NotFoundError("train config not found: " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return train_config_from_string(ss.str());
}

std::string train_config_schema() {
  return R"(JSON object; every key is optional.
  generator.base_width      int >= 1        64
  generator.n_res_blocks    int >= 0        9
  frame_disc.base_width     int >= 1        64
  frame_disc.n_layers       int >= 1        3
  temporal_disc.base_width  int >= 1        64
  temporal_disc.n_layers    int >= 1        3
  lambda_t                  real >= 0       1      weight of the temporal term
  epochs                    int >= 1        200
  batch_size                int >= 1        1
  learning_rate             real > 0        0.0002 Adam, constant
  beta1, beta2              real in [0,1)   0.5, 0.999
  seed                      uint            0      init, data order and history buffer
  gan_loss                  bce | lsgan     bce
  recurrence_horizon        0 | 1           1
  y1_prev_source            f_x0 | f_x1     f_x0   previous output for the first G call
  checkpoint_every          int >= 1        1      epochs between checkpoints
  frame_model_ref           string                 cache:<dir> or oracle:<spec>
  x_stream                  string          ""     sibling directory holding X frames
  y_stream                  string          ""     sibling directory holding Y frames
  triplet_stride            int >= 1        1
  pool_size                 int >= 0        0      discriminator history buffer, in batches
)";
}

std::uint64_t frame_digest(const std::vector<FrameTriplet>& triplets) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& t : triplets) {
    for (const auto& f : t.f) {
      if (!f) continue;
      const auto* bytes = reinterpret_cast<const unsigned char*>(f->pixels.data());
      const std::size_t n = static_cast<std::size_t>(f->pixels.size()) * sizeof(float);
      for (std::size_t i = 0; i < n; ++i) h = (h ^ bytes[i]) * 1099511628211ULL;
    }
  }
  return h;
}

TrainingData load_training_data(const TrainConfig& cfg, const fs::path& x_root, const fs::path& y_root,
                                const FrameModel& f) {
  TrainingData data;
  const DatasetManifest xm = load_manifest(x_root / "manifest.json");
  for (const auto& e : xm.entries) {
    if (e.domain != Domain::X) continue;
    const VideoSequence seq = load_sequence(stream_dir(x_root, e, cfg.x_stream), Domain::X, e.sequence_id);
    std::vector<FramePtr> outputs(seq.size());
    for (auto& trip : make_triplets(seq, cfg.triplet_stride)) {
      for (int k = 0; k < 3; ++k) {
        const int t = trip.x[k]->t_index;
        if (!outputs[t]) outputs[t] = std::make_shared<const Frame>(apply_frame_model(f, seq[t], seq.sequence_id));
        trip.f[k] = outputs[t];
      }
      data.x.push_back(std::move(trip));
    }
  }
  if (data.x.empty()) throw ConfigError("no X-domain triplets under " + x_root.string());

  const DatasetManifest ym = load_manifest(y_root / "manifest.json");
  const bool any_y = std::any_of(ym.entries.begin(), ym.entries.end(), [](const auto& e) { return e.domain == Domain::Y; });
  std::set<std::string> seen;
  for (const auto& e : ym.entries) {
    if ((any_y && e.domain != Domain::Y) || !seen.insert(e.sequence_id).second) continue;
    VideoSequence seq = load_sequence(stream_dir(y_root, e, cfg.y_stream), Domain::Y, e.sequence_id);
    for (auto& frame : seq.frames) {
      if (frame->channels != 3) frame = std::make_shared<const Frame>(frame->as_rgb());
    }
    for (auto& trip : make_triplets(seq, 1)) data.y.push_back(std::move(trip));
  }
  if (data.y.empty()) throw ConfigError("no Y-domain triplets under " + y_root.string());
  if (!data.x.front().x[0]->same_shape(*data.y.front().x[0])) {
    throw ContractError("X frames are " + std::to_string(data.x.front().x[0]->height) + "x" +
                        std::to_string(data.x.front().x[0]->width) + " but Y frames are " +
                        std::to_string(data.y.front().x[0]->height) + "x" +
                        std::to_string(data.y.front().x[0]->width));
  }
  data.f_digest = frame_digest(data.x);
  return data;
}

std::string log_header() { return "epoch,step,l_t,l_f,l_s,d_t,d_f,total,seconds"; }

std::string format_log_row(const EpochLog& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%d,%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.3f", r.epoch, r.step, r.mean.l_t, r.mean.l_f,
                r.mean.l_s, r.mean.d_t_loss, r.mean.d_f_loss, r.mean.l_total, r.seconds);
  return buf;
}

namespace {

nn::AdamOptions adam_options(const TrainConfig& c) { return {c.learning_rate, c.beta1, c.beta2, 1e-8}; }

double grad_norm(const ParameterList<float>& params) {
  double s = 0;
  for (const auto& p : params) {
    if (p.var.has_grad()) s += p.var.grad().template cast<double>().squaredNorm();
  }
  return std::sqrt(s);
}

Var<float> batch_of(const std::vector<const FrameTriplet*>& b, bool outputs, int k) {
  std::vector<const Frame*> frames;
  for (const auto* t : b) {
    const FramePtr& p = outputs ? t->f[k] : t->x[k];
    if (!p) throw PreconditionError("triplet from " + t->source_sequence + " has no frame-model output; run `rtgan precompute`");
    frames.push_back(p.get());
  }
  return Var<float>(frames_to_batch(frames));
}

}  // namespace

Trainer::Trainer(TrainConfig cfg)
    : cfg_((cfg.validate(), std::move(cfg))),
      models_(cfg_.model, cfg_.seed),
      opt_g_(models_.generator.parameters(), adam_options(cfg_)),
      opt_df_(models_.frame_disc.parameters(), adam_options(cfg_)),
      opt_dt_(models_.temporal_disc.parameters(), adam_options(cfg_)) {}

Trainer::PoolEntry Trainer::query_pool(PoolEntry fresh) {
  if (cfg_.pool_size == 0) return fresh;
  if (static_cast<int>(pool_.size()) < cfg_.pool_size) {
    pool_.push_back(fresh);
    return fresh;
  }
  std::mt19937_64 rng(mix_seed(cfg_.seed ^ 0x9001, static_cast<std::uint64_t>(step_)));
  if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.5) return fresh;
  const auto i = std::uniform_int_distribution<std::size_t>(0, pool_.size() - 1)(rng);
  std::swap(pool_[i], fresh);
  return fresh;
}

std::string Trainer::forensics(const LossBreakdown& p) const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "epoch %d step %lld: l_t=%g l_f=%g l_s=%g d_t=%g d_f=%g; grad norms G=%g D_t=%g D_f=%g", epoch_ + 1,
                step_ + 1, p.l_t, p.l_f, p.l_s, p.d_t_loss, p.d_f_loss, grad_norm(models_.generator.parameters()),
                grad_norm(models_.temporal_disc.parameters()), grad_norm(models_.frame_disc.parameters()));
  return buf;
}

LossBreakdown Trainer::train_step(const std::vector<const FrameTriplet*>& xb,
                                  const std::vector<const FrameTriplet*>& yb) {
  if (xb.empty() || xb.size() != yb.size()) throw ContractError("X and Y batches must be non-empty and equal-sized");
  auto& g = models_.generator;
  auto& d_t = models_.temporal_disc;
  auto& d_f = models_.frame_disc;
  const GanLoss kind = cfg_.gan_loss;
  LossBreakdown out;
  const auto value = [](const Var<float>& v) { return static_cast<double>(v.value().data()[0]); };
  const auto check = [&](double v) {
    if (!std::isfinite(v)) throw NumericError("non-finite loss at " + forensics(out));
  };

  try {
    const Triplet<float> x{batch_of(xb, false, 0), batch_of(xb, false, 1), batch_of(xb, false, 2)};
    const Triplet<float> y{batch_of(yb, false, 0), batch_of(yb, false, 1), batch_of(yb, false, 2)};
    const Var<float> f0 = batch_of(xb, true, 0), f1 = batch_of(xb, true, 1);
    const Rollout<float> r =
        recurrent_rollout<float>(g, x, cfg_.y1_prev_source == "f_x1" ? f1 : f0, cfg_.recurrence_horizon);
    const PoolEntry fake = query_pool({f0.value(), r.y1.value(), r.y2.value(), x.t1.value()});

    opt_dt_.zero_grad();
    const Var<float> dt_loss =
        temporal_disc_loss(d_t, y, Var<float>(fake.f0), Rollout<float>{Var<float>(fake.y1), Var<float>(fake.y2)}, kind);
    out.d_t_loss = value(dt_loss);
    check(out.d_t_loss);
    nn::backward(dt_loss);
    opt_dt_.step();

    opt_df_.zero_grad();
    const Var<float> df_loss =
        cfg_.pool_size == 0
            ? frame_disc_loss(d_f, x.t1, f1, r.y1, kind)
            : discriminator_loss(d_f(x.t1, f1), d_f(Var<float>(fake.x1), Var<float>(fake.y1)), kind,
                                 "frame discriminator");
    out.d_f_loss = value(df_loss);
    check(out.d_f_loss);
    nn::backward(df_loss);
    opt_df_.step();

    opt_g_.zero_grad();
    {
      FrozenParameters<float> freeze_t(d_t.parameters()), freeze_f(d_f.parameters());
      const Var<float> l_t = temporal_gen_loss(d_t, f0, r, kind);
      const Var<float> l_f = frame_gen_loss(d_f, x.t1, r.y1, kind);
      const Var<float> l_s = stationary_loss(g, x.t1, r.y1);
      const Var<float> total = total_objective(l_t, l_f, l_s, LossWeights{cfg_.lambda_t});
      out.l_t = value(l_t);
      out.l_f = value(l_f);
      out.l_s = value(l_s);
      out.l_total = total_objective(out.l_t, out.l_f, out.l_s, LossWeights{cfg_.lambda_t});
      check(out.l_total);
      nn::backward(total);
    }
    opt_g_.step();
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    if (msg.find("grad norms") != std::string::npos) throw;
    throw NumericError(msg + " at " + forensics(out));
  }
  ++step_;
  if (on_step) on_step(step_, out);
  return out;
}

EpochLog Trainer::run_epoch(const TrainingData& data) {
  if (data.x.empty() || data.y.empty()) throw PreconditionError("training data is empty");
  const auto start = std::chrono::steady_clock::now();
  const int epoch = epoch_ + 1;
  const std::uint64_t epoch_seed = mix_seed(cfg_.seed, static_cast<std::uint64_t>(epoch));
  std::vector<std::size_t> xo(data.x.size()), yo(data.y.size());
  std::iota(xo.begin(), xo.end(), 0);
  std::iota(yo.begin(), yo.end(), 0);
  std::mt19937_64 xrng(mix_seed(epoch_seed, 1)), yrng(mix_seed(epoch_seed, 2));
  std::shuffle(xo.begin(), xo.end(), xrng);
  std::shuffle(yo.begin(), yo.end(), yrng);

  LossBreakdown sum;
  long long steps = 0;
  const std::size_t b = static_cast<std::size_t>(cfg_.batch_size);
  for (std::size_t i = 0; i < xo.size(); i += b) {
    std::vector<const FrameTriplet*> xb, yb;
    for (std::size_t k = i; k < std::min(i + b, xo.size()); ++k) {
      xb.push_back(&data.x[xo[k]]);
      yb.push_back(&data.y[yo[k % yo.size()]]);
    }
    const LossBreakdown p = train_step(xb, yb);
    sum.l_t += p.l_t;
    sum.l_f += p.l_f;
    sum.l_s += p.l_s;
    sum.l_total += p.l_total;
    sum.d_t_loss += p.d_t_loss;
    sum.d_f_loss += p.d_f_loss;
    ++steps;
  }
  if (frame_digest(data.x) != data.f_digest) throw ContractError("frame-model outputs changed during training");
  epoch_ = epoch;

  EpochLog row;
  row.epoch = epoch;
  row.step = step_;
  const double n = static_cast<double>(steps);
  row.mean = {sum.l_t / n, sum.l_f / n, sum.l_s / n, sum.l_total / n, sum.d_t_loss / n, sum.d_f_loss / n};
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

// Checkpoint layout (host byte order): "RTCK", u32 version, string config, i32 epoch, i64 step,
// three parameter blocks (G, D_f, D_t), three Adam states, then the history buffer.
namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void string(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void floats(const Eigen::VectorXf& v) {
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
  }
  void tensor(const Tensor<float>& t) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (Index d : t.shape()) pod<std::int64_t>(d);
    floats(t.data());
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in_) fail("truncated");
    return v;
  }
  std::string string() {
    const auto n = pod<std::uint64_t>();
    if (n > (1u << 24)) fail("implausible string length");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) fail("truncated");
    return s;
  }
  void floats(Eigen::VectorXf& v) {
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
    if (!in_) fail("truncated");
  }
  Tensor<float> tensor() {
    const auto rank = pod<std::uint32_t>();
    if (rank > 8) fail("bad tensor rank");
    Shape shape(rank);
    for (auto& d : shape) {
      d = pod<std::int64_t>();
      if (d < 0 || d > (1 << 24)) fail("bad tensor dimension");
    }
    Tensor<float> t(shape);
    floats(t.data());
    return t;
  }
  [[noreturn]] void fail(const std::string& why) const { throw FormatError("checkpoint " + source_ + ": " + why); }

 private:
  std::istream& in_;
  std::string source_;
};

void write_params(Writer& w, const ParameterList<float>& params) {
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.string(p.name);
    w.tensor(p.var.value());
  }
}

void read_params(Reader& r, ParameterList<float>& params) {
  const auto n = r.pod<std::uint32_t>();
  if (n != params.size()) r.fail("parameter count differs from the configured network");
  for (auto& p : params) {
    const std::string name = r.string();
    Tensor<float> t = r.tensor();
    if (name != p.name || t.shape() != p.var.value().shape()) {
      r.fail("parameter " + name + " " + nn::shape_string(t.shape()) + " does not match " + p.name + " " +
             nn::shape_string(p.var.value().shape()));
    }
    p.var.mutable_value() = std::move(t);
  }
}

void write_adam(Writer& w, nn::Adam<float>& opt) {
  w.pod<std::int64_t>(opt.steps());
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(opt.first_moments().size()));
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    w.floats(opt.first_moments()[i]);
    w.floats(opt.second_moments()[i]);
  }
}

void read_adam(Reader& r, nn::Adam<float>& opt) {
  opt.set_steps(r.pod<std::int64_t>());
  if (r.pod<std::uint32_t>() != opt.first_moments().size()) r.fail("optimizer state size mismatch");
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    r.floats(opt.first_moments()[i]);
    r.floats(opt.second_moments()[i]);
  }
}

Checkpoint read_header(Reader& r) {
  char magic[4];
  for (char& c : magic) c = r.pod<char>();
  if (std::string(magic, 4) != "RTCK") r.fail("not a checkpoint");
  if (r.pod<std::uint32_t>() != kCheckpointVersion) r.fail("unsupported version");
  Checkpoint c;
  c.config_text = r.string();
  c.epoch = r.pod<std::int32_t>();
  c.step = r.pod<std::int64_t>();
  return c;
}

std::ifstream open_checkpoint(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw NotFoundError("checkpoint not found: " + file.string());
  return in;
}

}  // namespace

void Trainer::save_checkpoint(const fs::path& file) const {
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw NotFoundError("cannot write " + tmp.string());
    Writer w(out);
    out.write("RTCK", 4);
    w.pod<std::uint32_t>(kCheckpointVersion);
    w.string(train_config_to_string(cfg_));
    w.pod<std::int32_t>(epoch_);
    w.pod<std::int64_t>(step_);
    auto& self = const_cast<Trainer&>(*this);
    write_params(w, models_.generator.parameters());
    write_params(w, models_.frame_disc.parameters());
    write_params(w, models_.temporal_disc.parameters());
    write_adam(w, self.opt_g_);
    write_adam(w, self.opt_df_);
    write_adam(w, self.opt_dt_);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(pool_.size()));
    for (const auto& e : pool_) {
      for (const auto* t : {&e.f0, &e.y1, &e.y2, &e.x1}) w.tensor(*t);
    }
    if (!out) throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, file);
}

void Trainer::load_checkpoint(const fs::path& file) {
  std::ifstream in = open_checkpoint(file);
  Reader r(in, file.string());
  const Checkpoint c = read_header(r);
  read_params(r, models_.generator.parameters());
  read_params(r, models_.frame_disc.parameters());
  read_params(r, models_.temporal_disc.parameters());
  read_adam(r, opt_g_);
  read_adam(r, opt_df_);
  read_adam(r, opt_dt_);
  pool_.clear();
  const auto n = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    PoolEntry e;
    e.f0 = r.tensor();
    e.y1 = r.tensor();
    e.y2 = r.tensor();
    e.x1 = r.tensor();
    pool_.push_back(std::move(e));
  }
  epoch_ = c.epoch;
  step_ = c.step;
}

Checkpoint read_checkpoint_header(const fs::path& file) {
  std::ifstream in = open_checkpoint(file);
  Reader r(in, file.string());
  return read_header(r);
}

Generator<float> load_generator(const fs::path& file) {
  std::ifstream in = open_checkpoint(file);
  Reader r(in, file.string());
  const Checkpoint c = read_header(r);
  Generator<float> g(train_config_from_string(c.config_text).model.generator);
  read_params(r, g.parameters());
  return g;
}

std::string checkpoint_file_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_epoch_%04d.bin", epoch);
  return buf;
}

namespace {

// Config with the fields that may change across a resume blanked out.
std::string resumable_identity(TrainConfig c) {
  c.epochs = 1;
  c.checkpoint_every = 1;
  return train_config_to_string(c);
}

fs::path newest_checkpoint(const fs::path& dir) {
  fs::path best;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.starts_with("ckpt_epoch_") && name.ends_with(".bin") && (best.empty() || name > best.filename().string())) {
      best = entry.path();
    }
  }
  return best;
}

void truncate_log(const fs::path& log, int last_epoch) {
  std::vector<std::string> keep;
  std::ifstream in(log);
  std::string line;
  while (std::getline(in, line)) {
    if (keep.empty()) {
      keep.push_back(line);
      continue;
    }
    if (std::stoi(line.substr(0, line.find(','))) <= last_epoch) keep.push_back(line);
  }
  in.close();
  std::ofstream out(log, std::ios::trunc);
  for (const auto& l : keep) out << l << "\n";
}

}  // namespace

fs::path train(const TrainConfig& cfg, const fs::path& x_root, const fs::path& y_root, const fs::path& out_dir,
               const TrainOptions& options) {
  cfg.validate();
  if (cfg.frame_model_ref.empty()) throw ConfigError("frame_model_ref is not set (cache:<dir> from `rtgan precompute`)");
  fs::path resume_from;
  if (options.resume) {
    if (fs::exists(out_dir)) resume_from = newest_checkpoint(out_dir);
    if (resume_from.empty()) throw NotFoundError("no checkpoint to resume from in " + out_dir.string());
    const Checkpoint header = read_checkpoint_header(resume_from);
    if (resumable_identity(train_config_from_string(header.config_text)) != resumable_identity(cfg)) {
      throw ConfigError("checkpoint " + resume_from.string() + " was trained with a different configuration");
    }
  } else if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    if (!options.overwrite) {
      throw ConfigError("output directory " + out_dir.string() + " is not empty; pass --overwrite or --resume");
    }
    fs::remove_all(out_dir);
  }
  fs::create_directories(out_dir);

  const auto f = make_frame_model(cfg.frame_model_ref);
  const TrainingData data = load_training_data(cfg, x_root, y_root, *f);
  Trainer trainer(cfg);
  const fs::path log = out_dir / "log.csv";
  if (!resume_from.empty()) {
    trainer.load_checkpoint(resume_from);
    truncate_log(log, trainer.epoch());
  }
  {
    std::ofstream echo(out_dir / "config.echo", std::ios::trunc);
    echo << train_config_to_string(cfg);
  }
  if (!fs::exists(log)) std::ofstream(log) << log_header() << "\n";

  fs::path last = resume_from;
  while (trainer.epoch() < cfg.epochs) {
    const EpochLog row = trainer.run_epoch(data);
    {
      std::ofstream out(log, std::ios::app);
      out << format_log_row(row) << "\n";
    }
    if (row.epoch % cfg.checkpoint_every == 0 || row.epoch == cfg.epochs) {
      last = out_dir / checkpoint_file_name(row.epoch);
      trainer.save_checkpoint(last);
    }
  }
  return last;
}

}  // namespace rtgan
