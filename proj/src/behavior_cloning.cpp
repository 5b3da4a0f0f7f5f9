#include "gva/behavior_cloning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "gva/errors.hpp"
#include "gva/io.hpp"

namespace gva {

// ---------------------------------------------------------------------------
// Dataset

void Dataset::validate() const {
  if (state_dim == 0 || action_dim == 0) throw DataError("dataset: zero state or action dimension");
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& tr = trajectories[i];
    if (tr.states.size() != tr.actions.size())
      throw DataError("dataset: trajectory " + std::to_string(i) + " has mismatched state/action counts");
    for (std::size_t h = 0; h < tr.states.size(); ++h)
      if (tr.states[h].size() != state_dim || tr.actions[h].size() != action_dim)
        throw DataError("dataset: trajectory " + std::to_string(i) + " step " + std::to_string(h) +
                        " has inconsistent dimensions");
  }
  std::vector<int> seen(trajectories.size(), 0);
  for (const auto* part : {&train, &val})
    for (std::size_t i : *part) {
      if (i >= trajectories.size()) throw DataError("dataset: split index out of range");
      if (seen[i]++) throw DataError("dataset: trajectory " + std::to_string(i) + " appears twice in the split");
    }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) throw DataError("dataset: trajectory " + std::to_string(i) + " is in neither split");
}

std::size_t Dataset::pair_count(const std::vector<std::size_t>& which) const {
  std::size_t n = 0;
  for (std::size_t i : which) n += trajectories.at(i).states.size();
  return n;
}

void Dataset::write_csv(const std::filesystem::path& path) const {
  validate();
  CsvTable t;
  t.header = {"traj_id", "h", "split"};
  for (std::size_t i = 0; i < state_dim; ++i) t.header.push_back("x" + std::to_string(i));
  for (std::size_t i = 0; i < action_dim; ++i) t.header.push_back("u" + std::to_string(i));
  std::vector<const char*> split(trajectories.size(), "train");
  for (std::size_t i : val) split[i] = "val";
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const auto& tr = trajectories[k];
    // A start already past the cliff leaves no pairs; keep a marker row so ids stay dense.
    if (tr.states.empty()) {
      std::vector<std::string> row{std::to_string(k), "-", split[k]};
      row.resize(t.header.size(), "-");
      t.rows.push_back(std::move(row));
    }
    for (std::size_t h = 0; h < tr.states.size(); ++h) {
      std::vector<std::string> row{std::to_string(k), std::to_string(h), split[k]};
      for (double v : tr.states[h]) row.push_back(format_real(v));
      for (double v : tr.actions[h]) row.push_back(format_real(v));
      t.rows.push_back(std::move(row));
    }
  }
  gva::write_csv(path, t);
}

Dataset Dataset::read_csv(const std::filesystem::path& path) {
  const CsvTable t = gva::read_csv(path);
  Dataset d;
  const std::size_t id_col = t.index("traj_id");
  const std::size_t h_col = t.index("h");
  const std::size_t split_col = t.index("split");
  std::vector<std::size_t> xs, us;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const std::string& name = t.header[c];
    if (name.size() > 1 && name[0] == 'x') xs.push_back(c);
    if (name.size() > 1 && name[0] == 'u') us.push_back(c);
  }
  d.state_dim = xs.size();
  d.action_dim = us.size();
  std::map<std::size_t, std::string> split_of;
  for (const auto& row : t.rows) {
    const auto k = static_cast<std::size_t>(std::stoull(row[id_col]));
    if (k >= d.trajectories.size()) d.trajectories.resize(k + 1);
    auto& tr = d.trajectories[k];
    auto [it, inserted] = split_of.emplace(k, row[split_col]);
    if (!inserted && it->second != row[split_col])
      throw DataError("dataset csv: trajectory " + std::to_string(k) + " has mixed split labels");
    if (row[h_col] == "-") continue;
    const auto h = static_cast<std::size_t>(std::stoull(row[h_col]));
    if (h != tr.states.size())
      throw DataError("dataset csv: trajectory " + std::to_string(k) + " rows are out of order");
    Vector x, u;
    for (std::size_t c : xs) x.push_back(parse_real(row[c]));
    for (std::size_t c : us) u.push_back(parse_real(row[c]));
    tr.states.push_back(std::move(x));
    tr.actions.push_back(std::move(u));
  }
  for (const auto& [k, s] : split_of) {
    if (s == "train") d.train.push_back(k);
    else if (s == "val") d.val.push_back(k);
    else throw DataError("dataset csv: unknown split label '" + s + "'");
  }
  d.validate();
  return d;
}

Dataset collect_expert_data(const LinearSystem& system, const LinearPolicy& expert, std::size_t n,
                            Rng& rng, double val_fraction, double label_noise) {
  system.validate();
  if (n < 2) throw ArgumentError("collect_expert_data: N must be >= 2");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw ArgumentError("collect_expert_data: validation fraction must be in (0, 1)");
  if (!(label_noise >= 0.0)) throw ArgumentError("collect_expert_data: label noise must be >= 0");
  Dataset d;
  d.state_dim = system.state_dim();
  d.action_dim = system.action_dim();
  d.trajectories.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Rng traj_rng = rng.child(k);
    const Vector x0 = system.init.sample(traj_rng, d.state_dim);
    RolloutResult r = rollout(system, expert, x0, traj_rng);
    if (r.diverged) throw DataError("collect_expert_data: expert diverged on trajectory " + std::to_string(k));
    Trajectory tr;
    tr.states.assign(r.states.begin(), r.states.begin() + static_cast<std::ptrdiff_t>(r.actions.size()));
    tr.actions = std::move(r.actions);
    if (label_noise > 0.0)
      for (auto& u : tr.actions)
        for (double& v : u) v += label_noise * traj_rng.normal();
    d.trajectories.push_back(std::move(tr));
  }
  // Random split, deterministic in the caller's stream.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng split_rng = rng.child(n);
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(split_rng.uniform() * static_cast<double>(i + 1));
    std::swap(order[i], order[std::min(j, i)]);
  }
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n))), 1, n - 1);
  d.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  d.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(d.val.begin(), d.val.end());
  std::sort(d.train.begin(), d.train.end());
  return d;
}

// ---------------------------------------------------------------------------
// MLP

std::string to_string(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  throw ArgumentError("unknown activation '" + s + "'");
}

std::vector<std::size_t> MlpArch::layer_dims() const {
  std::vector<std::size_t> dims{input_dim()};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(action_dim);
  return dims;
}

std::size_t MlpArch::param_count() const {
  const auto dims = layer_dims();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) n += (dims[l] + (bias ? 1 : 0)) * dims[l + 1];
  return n;
}

void MlpArch::validate() const {
  if (state_dim == 0 || action_dim == 0) throw ArgumentError("mlp: zero input or output dimension");
  for (std::size_t h : hidden)
    if (h == 0) throw ArgumentError("mlp: hidden width must be >= 1");
}

namespace {

double act(Activation a, double z) { return a == Activation::kRelu ? (z > 0.0 ? z : 0.0) : std::tanh(z); }

// Derivative expressed through the pre-activation z and activation y.
double act_grad(Activation a, double z, double y) {
  return a == Activation::kRelu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - y * y;
}

void check_params(const MlpArch& arch, std::span<const double> params) {
  if (params.size() != arch.param_count())
    throw ArgumentError("mlp: got " + std::to_string(params.size()) + " parameters, architecture needs " +
                        std::to_string(arch.param_count()));
}

Vector make_input(const MlpArch& arch, std::span<const double> x, std::span<const double> prev_u) {
  if (x.size() != arch.state_dim)
    throw ArgumentError("mlp: state has dimension " + std::to_string(x.size()) + ", expected " +
                        std::to_string(arch.state_dim));
  Vector in(x.begin(), x.end());
  if (arch.prev_action) {
    if (prev_u.empty()) {
      in.resize(arch.input_dim(), 0.0);
    } else {
      if (prev_u.size() != arch.action_dim) throw ArgumentError("mlp: previous action has the wrong dimension");
      in.insert(in.end(), prev_u.begin(), prev_u.end());
    }
  } else if (!prev_u.empty() && prev_u.size() != arch.action_dim) {
    throw ArgumentError("mlp: previous action has the wrong dimension");
  }
  return in;
}

// Forward pass keeping pre-activations z[l] and activations a[l] (a[0] is the input).
struct Trace {
  std::vector<Vector> z;
  std::vector<Vector> a;
};

void forward_trace(const MlpArch& arch, const std::vector<std::size_t>& dims, std::span<const double> params,
                   Vector input, Trace& tr) {
  const std::size_t L = dims.size() - 1;
  tr.a.resize(L + 1);
  tr.z.resize(L + 1);
  tr.a[0] = std::move(input);
  std::size_t off = 0;
  for (std::size_t l = 1; l <= L; ++l) {
    const std::size_t in = dims[l - 1], out = dims[l];
    const double* W = params.data() + off;
    off += in * out;
    const double* b = arch.bias ? params.data() + off : nullptr;
    if (arch.bias) off += out;
    Vector& z = tr.z[l];
    z.assign(out, 0.0);
    const Vector& prev = tr.a[l - 1];
    for (std::size_t i = 0; i < out; ++i) {
      double s = b ? b[i] : 0.0;
      const double* row = W + i * in;
      for (std::size_t j = 0; j < in; ++j) s += row[j] * prev[j];
      z[i] = s;
    }
    if (l < L) {
      Vector& a = tr.a[l];
      a.resize(out);
      for (std::size_t i = 0; i < out; ++i) a[i] = act(arch.activation, z[i]);
    } else {
      tr.a[l] = z;
    }
  }
}

void accumulate_grad(const MlpArch& arch, const std::vector<std::size_t>& dims, std::span<const double> params,
                     const Trace& tr, Vector delta, std::span<double> grad) {
  const std::size_t L = dims.size() - 1;
  std::vector<std::size_t> offset(L + 1, 0);
  std::size_t off = 0;
  for (std::size_t l = 1; l <= L; ++l) {
    offset[l] = off;
    off += dims[l - 1] * dims[l] + (arch.bias ? dims[l] : 0);
  }
  for (std::size_t l = L; l >= 1; --l) {
    const std::size_t in = dims[l - 1], out = dims[l];
    double* gW = grad.data() + offset[l];
    const Vector& prev = tr.a[l - 1];
    for (std::size_t i = 0; i < out; ++i) {
      const double di = delta[i];
      if (di == 0.0) continue;
      double* row = gW + i * in;
      for (std::size_t j = 0; j < in; ++j) row[j] += di * prev[j];
    }
    if (arch.bias) {
      double* gb = gW + in * out;
      for (std::size_t i = 0; i < out; ++i) gb[i] += delta[i];
    }
    if (l == 1) break;
    const double* W = params.data() + offset[l];
    Vector next(in, 0.0);
    for (std::size_t i = 0; i < out; ++i) {
      const double di = delta[i];
      if (di == 0.0) continue;
      const double* row = W + i * in;
      for (std::size_t j = 0; j < in; ++j) next[j] += row[j] * di;
    }
    for (std::size_t j = 0; j < in; ++j) next[j] *= act_grad(arch.activation, tr.z[l - 1][j], tr.a[l - 1][j]);
    delta = std::move(next);
  }
}

LossGrad loss_grad_impl(const MlpArch& arch, std::span<const double> params,
                        const std::vector<const Sample*>& batch, bool want_grad) {
  check_params(arch, params);
  if (batch.empty()) throw ArgumentError("mlp: empty batch");
  const auto dims = arch.layer_dims();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  LossGrad out;
  if (want_grad) out.grad.assign(params.size(), 0.0);
  Trace tr;
  for (const Sample* s : batch) {
    if (s->u.size() != arch.action_dim) throw ArgumentError("mlp: target has the wrong dimension");
    forward_trace(arch, dims, params, make_input(arch, s->x, s->prev_u), tr);
    const Vector& y = tr.a.back();
    Vector delta(arch.action_dim);
    double sq = 0.0;
    for (std::size_t i = 0; i < arch.action_dim; ++i) {
      const double r = y[i] - s->u[i];
      sq += r * r;
      delta[i] = r * inv_n;
    }
    out.loss += 0.5 * sq * inv_n;
    if (want_grad) accumulate_grad(arch, dims, params, tr, std::move(delta), out.grad);
  }
  return out;
}

std::vector<const Sample*> pointers(const std::vector<Sample>& batch) {
  std::vector<const Sample*> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(&s);
  return out;
}

}  // namespace

MlpPolicy MlpPolicy::init(const MlpArch& arch, Rng& rng) {
  arch.validate();
  MlpPolicy p{arch, ParamVector(arch.param_count(), 0.0)};
  const auto dims = arch.layer_dims();
  std::size_t off = 0;
  for (std::size_t l = 1; l < dims.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l - 1]));
    for (std::size_t k = 0; k < dims[l - 1] * dims[l]; ++k) p.params[off + k] = bound * (2.0 * rng.uniform() - 1.0);
    off += dims[l - 1] * dims[l] + (arch.bias ? dims[l] : 0);
  }
  return p;
}

MlpPolicy MlpPolicy::zeros(const MlpArch& arch) {
  arch.validate();
  return {arch, ParamVector(arch.param_count(), 0.0)};
}

MlpPolicy MlpPolicy::linear(const Matrix& K) {
  MlpArch arch;
  arch.state_dim = K.cols();
  arch.action_dim = K.rows();
  arch.bias = false;
  arch.validate();
  return {arch, ParamVector(K.data().begin(), K.data().end())};
}

Vector mlp_forward(const MlpArch& arch, std::span<const double> params, std::span<const double> x,
                   std::span<const double> prev_u) {
  check_params(arch, params);
  Trace tr;
  forward_trace(arch, arch.layer_dims(), params, make_input(arch, x, prev_u), tr);
  return std::move(tr.a.back());
}

Vector MlpPolicy::forward(std::span<const double> x, std::span<const double> prev_u) const {
  return mlp_forward(arch, params, x, prev_u);
}

PolicyFn MlpPolicy::as_policy() const {
  check_params(arch, params);
  if (arch.hidden.empty() && !arch.bias && !arch.prev_action) {
    const Matrix K = linear_gain();
    return [K](std::span<const double> x, std::span<const double>) { return K * x; };
  }
  return [self = *this](std::span<const double> x, std::span<const double> prev_u) {
    return self.forward(x, prev_u);
  };
}

Matrix MlpPolicy::linear_gain() const {
  if (!arch.hidden.empty() || arch.bias) throw ArgumentError("linear_gain: policy is not a bias-free linear map");
  Matrix K(arch.action_dim, arch.input_dim());
  std::copy(params.begin(), params.end(), K.data().begin());
  return K;
}

LossGrad mlp_loss_grad(const MlpArch& arch, std::span<const double> params, const std::vector<Sample>& batch) {
  return loss_grad_impl(arch, params, pointers(batch), true);
}

ParamVector mlp_grad(const MlpArch& arch, std::span<const double> params, const std::vector<Sample>& batch) {
  return mlp_loss_grad(arch, params, batch).grad;
}

double mlp_loss(const MlpArch& arch, std::span<const double> params, const std::vector<Sample>& batch) {
  return loss_grad_impl(arch, params, pointers(batch), false).loss;
}

std::vector<Sample> dataset_samples(const Dataset& data, const std::vector<std::size_t>& which, bool prev_action) {
  std::vector<Sample> out;
  out.reserve(data.pair_count(which));
  for (std::size_t k : which) {
    const auto& tr = data.trajectories.at(k);
    for (std::size_t h = 0; h < tr.states.size(); ++h) {
      Sample s{tr.states[h], {}, tr.actions[h]};
      if (prev_action) s.prev_u = h == 0 ? Vector(data.action_dim, 0.0) : tr.actions[h - 1];
      out.push_back(std::move(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

Optimizer OptimizerSpec::make() const {
  if (kind == Kind::kSgd) return Optimizer(SgdState{beta1, {}});
  AdamWState s;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  s.weight_decay = weight_decay;
  return Optimizer(s);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ArgumentError("train: epochs must be >= 1");
  if (batch_size < 1) throw ArgumentError("train: batch size must be >= 1");
  if (eval_every < 1) throw ArgumentError("train: eval_every must be >= 1");
  if (evaluate && eval_seeds < 1) throw ArgumentError("train: eval seeds must be >= 1");
  ema.validate();
  optimizer.make();
}

EvalResult eval_checkpoint(const LinearSystem& system, const PolicyFn& policy, std::size_t seeds,
                           std::uint64_t base_seed) {
  if (seeds < 1) throw ArgumentError("eval_checkpoint: seeds must be >= 1");
  const Rng base(base_seed);
  EvalResult out;
  out.rewards.resize(seeds);
  out.diverged.resize(seeds);
  double sum = 0.0;
  for (std::size_t k = 0; k < seeds; ++k) {
    Rng rk = base.child(k);
    const Vector x0 = system.init.sample(rk, system.state_dim());
    const RolloutResult r = rollout(system, policy, x0, rk);
    const bool bad = r.diverged || !std::isfinite(r.total_reward);
    out.diverged[k] = bad;
    out.rewards[k] = bad ? std::numeric_limits<double>::quiet_NaN() : r.total_reward;
    if (bad) ++out.diverged_count;
    else sum += r.total_reward;
  }
  const std::size_t ok = seeds - out.diverged_count;
  out.mean = ok ? sum / static_cast<double>(ok) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

TrainResult train_bc(const Dataset& data, const MlpPolicy& init, const TrainConfig& config,
                     const LinearSystem& system, const Rng& rng) {
  data.validate();
  config.validate();
  const MlpArch& arch = init.arch;
  arch.validate();
  check_params(arch, init.params);
  if (arch.state_dim != data.state_dim || arch.action_dim != data.action_dim)
    throw ArgumentError("train_bc: policy dimensions do not match the dataset");
  if (config.evaluate) system.validate();

  const std::vector<Sample> train = dataset_samples(data, data.train, arch.prev_action);
  const std::vector<Sample> val = dataset_samples(data, data.val, arch.prev_action);
  if (train.empty()) throw DataError("train_bc: training split has no pairs");
  std::vector<const Sample*> val_ptrs;
  for (const auto& s : val) val_ptrs.push_back(&s);
  std::vector<const Sample*> all_train;
  for (const auto& s : train) all_train.push_back(&s);

  const std::size_t n = train.size();
  const std::size_t per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total = config.epochs * per_epoch;

  TrainResult out;
  out.total_steps = total;
  ParamVector params = init.params;
  EmaFilter ema(config.ema);
  ema.update(0, params);
  Optimizer opt = config.optimizer.make();

  auto val_loss = [&](const ParamVector& p) {
    return val_ptrs.empty() ? 0.0 : loss_grad_impl(arch, p, val_ptrs, false).loss;
  };
  auto record = [&](std::size_t step, double train_loss) {
    CheckpointRecord rec;
    rec.step = step;
    rec.train_loss = train_loss;
    rec.val_loss = val_loss(params);
    rec.ema_val_loss = val_loss(ema.shadow());
    if (config.evaluate) {
      rec.raw_eval = eval_checkpoint(system, MlpPolicy{arch, params}.as_policy(), config.eval_seeds, config.eval_seed);
      rec.ema_eval =
          eval_checkpoint(system, MlpPolicy{arch, ema.shadow()}.as_policy(), config.eval_seeds, config.eval_seed);
    }
    if (config.retain_params) {
      rec.raw_params = params;
      rec.ema_params = ema.shadow();
    }
    out.records.push_back(std::move(rec));
  };

  record(0, loss_grad_impl(arch, params, all_train, false).loss);

  std::vector<std::size_t> order(n);
  std::vector<const Sample*> batch;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle = rng.child(epoch);
    for (std::size_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(shuffle.uniform() * static_cast<double>(i + 1));
      std::swap(order[i], order[std::min(j, i)]);
    }
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      ++step;
      batch.clear();
      for (std::size_t i = start; i < std::min(n, start + config.batch_size); ++i) batch.push_back(&train[order[i]]);
      LossGrad lg = loss_grad_impl(arch, params, batch, true);
      if (!std::isfinite(lg.loss) || !all_finite(lg.grad)) {
        const std::size_t last = out.records.empty() ? 0 : out.records.back().step;
        throw NumericError("train_bc: non-finite loss at step " + std::to_string(step) +
                           "; last finite checkpoint at step " + std::to_string(last));
      }
      params = opt.step(params, lg.grad, config.schedule.at(step, total));
      ema.update(step, params);
      loss_sum += lg.loss;
      ++loss_count;
      if (step % config.eval_every == 0 || step == total) {
        record(step, loss_sum / static_cast<double>(loss_count));
        loss_sum = 0.0;
        loss_count = 0;
      }
    }
  }
  out.final_params = params;
  out.final_ema = ema.shadow();
  return out;
}

}  // namespace gva
