#include "blended/autodiff/autodiff.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <fstream>
#include <limits>

#include "blended/util/error.hpp"

namespace blended::ad {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

int ParamStore::add(const std::string& name, int rows, int cols, Rng& rng, Init init) {
  if (index_.count(name)) throw ConfigError("duplicate parameter " + name);
  if (rows <= 0 || cols <= 0) throw ShapeError("parameter " + name + " needs a positive shape");
  Param p;
  p.name = name;
  p.value = Mat::Zero(rows, cols);
  if (init == Init::Uniform) {
    const double a = 1.0 / std::sqrt(static_cast<double>(cols));
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) p.value(i, j) = (2.0 * uniform_real(rng) - 1.0) * a;
  }
  p.grad = p.m = p.v = p.vhat = Mat::Zero(rows, cols);
  const int id = static_cast<int>(params_.size());
  params_.push_back(std::move(p));
  index_[name] = id;
  return id;
}

int ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

int ParamStore::id(const std::string& name) const {
  const int i = find(name);
  if (i < 0) throw ConfigError("unknown parameter " + name);
  return i;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

void ParamStore::copy_values_from(const ParamStore& other) {
  for (auto& p : params_) {
    const int j = other.find(p.name);
    if (j < 0) continue;
    const Param& q = other.at(j);
    if (q.value.rows() != p.value.rows() || q.value.cols() != p.value.cols())
      throw ShapeError("shape mismatch copying " + p.name);
    p.value = q.value;
  }
}

void amsgrad_step(ParamStore& ps, const AmsGrad& opt) {
  for (int i = 0; i < ps.size(); ++i)
    if (!ps.at(i).grad.allFinite()) throw NonFiniteError(i, "non-finite gradient for " + ps.at(i).name);
  for (int i = 0; i < ps.size(); ++i) {
    Param& p = ps.at(i);
    p.m = opt.beta1 * p.m + (1.0 - opt.beta1) * p.grad;
    p.v = opt.beta2 * p.v + (1.0 - opt.beta2) * p.grad.cwiseProduct(p.grad);
    p.vhat = p.vhat.cwiseMax(p.v);
    p.value.array() -= opt.lr * p.m.array() / (p.vhat.array().sqrt() + opt.eps);
    p.grad.setZero();
  }
}

// ---------------------------------------------------------------------------

Var Tape::push(Node n) {
  const Var id = static_cast<Var>(nodes_.size());
  if (!n.value.allFinite()) throw NonFiniteError(id, "non-finite value in forward pass");
  nodes_.push_back(std::move(n));
  return id;
}

Var Tape::constant(Vec v) {
  Node n;
  n.op = Op::Const;
  n.value = std::move(v);
  return push(std::move(n));
}

Var Tape::param(int pid, int col) {
  const Param& p = ps_->at(pid);
  if (col < 0 || col >= p.value.cols()) throw ShapeError("column out of range for " + p.name);
  Node n;
  n.op = Op::ParamCol;
  n.value = p.value.col(col);
  n.pids = {pid};
  n.aux = {col};
  return push(std::move(n));
}

Var Tape::affine(const std::vector<std::pair<int, Var>>& terms, int bias) {
  if (terms.empty()) throw ShapeError("affine with no terms");
  Node n;
  n.op = Op::Affine;
  const auto rows = ps_->at(terms[0].first).value.rows();
  n.value = bias >= 0 ? Vec(ps_->at(bias).value.col(0)) : Vec::Zero(rows);
  if (n.value.size() != rows) throw ShapeError("bias shape mismatch");
  for (const auto& [w, x] : terms) {
    const Mat& W = ps_->at(w).value;
    const Vec& xv = value(x);
    if (W.rows() != rows || W.cols() != xv.size())
      throw ShapeError("affine: " + ps_->at(w).name + " is " + std::to_string(W.rows()) + "x" +
                       std::to_string(W.cols()) + ", input has " + std::to_string(xv.size()));
    n.value.noalias() += W * xv;
    n.pids.push_back(w);
    n.in.push_back(x);
  }
  n.aux = {bias};
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  if (value(a).size() != value(b).size()) throw ShapeError("add: size mismatch");
  Node n;
  n.op = Op::Add;
  n.value = value(a) + value(b);
  n.in = {a, b};
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  if (value(a).size() != value(b).size()) throw ShapeError("mul: size mismatch");
  Node n;
  n.op = Op::Mul;
  n.value = value(a).cwiseProduct(value(b));
  n.in = {a, b};
  return push(std::move(n));
}

Var Tape::one_minus(Var a) {
  Node n;
  n.op = Op::OneMinus;
  n.value = (1.0 - value(a).array()).matrix();
  n.in = {a};
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  Node n;
  n.op = Op::Scale;
  n.value = c * value(a);
  n.in = {a};
  n.c = c;
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  Node n;
  n.op = Op::Relu;
  const Vec& x = value(a);
  n.value = x.cwiseMax(0.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    kinks_ ^= x(i) > 0 ? 0x9e37ULL + static_cast<std::uint64_t>(i) : 0x7f4aULL;
    kinks_ *= 0x100000001b3ULL;
  }
  n.in = {a};
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::Sigmoid;
  n.value = value(a).unaryExpr([](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  n.in = {a};
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::Tanh;
  n.value = value(a).array().tanh().matrix();
  n.in = {a};
  return push(std::move(n));
}

Var Tape::softmax(Var a) {
  Node n;
  n.op = Op::Softmax;
  const Vec& x = value(a);
  n.value = (x.array() - x.maxCoeff()).exp().matrix();
  n.value /= n.value.sum();
  n.in = {a};
  return push(std::move(n));
}

Var Tape::concat(const std::vector<Var>& xs) {
  Eigen::Index total = 0;
  for (Var x : xs) total += value(x).size();
  Node n;
  n.op = Op::Concat;
  n.value.resize(total);
  Eigen::Index off = 0;
  for (Var x : xs) {
    n.value.segment(off, value(x).size()) = value(x);
    off += value(x).size();
  }
  n.in = xs;
  return push(std::move(n));
}

Var Tape::mean(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("mean of nothing");
  Node n;
  n.op = Op::Mean;
  n.value = value(xs[0]);
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (value(xs[i]).size() != n.value.size()) throw ShapeError("mean: size mismatch");
    n.value += value(xs[i]);
  }
  n.value /= static_cast<double>(xs.size());
  n.in = xs;
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::Sum;
  n.value = Vec::Constant(1, value(a).sum());
  n.in = {a};
  return push(std::move(n));
}

Var Tape::masked_nll(Var logits, const std::vector<int>& legal, int target) {
  const Vec& z = value(logits);
  if (std::find(legal.begin(), legal.end(), target) == legal.end())
    throw ConfigError("masked_nll: target " + std::to_string(target) + " is not a legal action");
  double m = -std::numeric_limits<double>::infinity();
  for (int i : legal) {
    if (i < 0 || i >= z.size()) throw ShapeError("masked_nll: action index out of range");
    m = std::max(m, z(i));
  }
  double s = 0.0;
  for (int i : legal) s += std::exp(z(i) - m);
  Node n;
  n.op = Op::MaskedNll;
  n.value = Vec::Constant(1, m + std::log(s) - z(target));
  n.in = {logits};
  n.aux = legal;
  n.c = static_cast<double>(target);
  return push(std::move(n));
}

Var Tape::bce_logits(Var z, double label) {
  if (value(z).size() != 1) throw ShapeError("bce_logits expects a scalar logit");
  const double x = value(z)(0);
  Node n;
  n.op = Op::BceLogits;
  n.value = Vec::Constant(1, std::max(x, 0.0) - x * label + std::log1p(std::exp(-std::abs(x))));
  n.in = {z};
  n.c = label;
  return push(std::move(n));
}

void Tape::backward(Var out, ParamStore& ps, double seed) {
  if (&ps != ps_) throw ConfigError("backward into a different parameter store");
  if (consumed_) throw Error("tape already consumed by backward");
  consumed_ = true;
  std::vector<Vec> g(nodes_.size());
  g[static_cast<std::size_t>(out)] = Vec::Constant(value(out).size(), seed);
  auto acc = [&](Var v, const Vec& d) {
    Vec& t = g[static_cast<std::size_t>(v)];
    if (t.size() == 0)
      t = d;
    else
      t += d;
  };
  for (Var i = out; i >= 0; --i) {
    const Vec& gi = g[static_cast<std::size_t>(i)];
    if (gi.size() == 0) continue;
    const Node& n = node(i);
    switch (n.op) {
      case Op::Const:
        break;
      case Op::ParamCol:
        ps.at(n.pids[0]).grad.col(n.aux[0]) += gi;
        break;
      case Op::Affine:
        if (n.aux[0] >= 0) ps.at(n.aux[0]).grad.col(0) += gi;
        for (std::size_t k = 0; k < n.in.size(); ++k) {
          Param& W = ps.at(n.pids[k]);
          W.grad.noalias() += gi * value(n.in[k]).transpose();
          acc(n.in[k], W.value.transpose() * gi);
        }
        break;
      case Op::Add:
        acc(n.in[0], gi);
        acc(n.in[1], gi);
        break;
      case Op::Mul:
        acc(n.in[0], gi.cwiseProduct(value(n.in[1])));
        acc(n.in[1], gi.cwiseProduct(value(n.in[0])));
        break;
      case Op::OneMinus:
        acc(n.in[0], -gi);
        break;
      case Op::Scale:
        acc(n.in[0], n.c * gi);
        break;
      case Op::Relu:
        acc(n.in[0], (value(n.in[0]).array() > 0.0).select(gi, 0.0));
        break;
      case Op::Sigmoid:
        acc(n.in[0], gi.cwiseProduct(n.value.cwiseProduct((1.0 - n.value.array()).matrix())));
        break;
      case Op::Tanh:
        acc(n.in[0], gi.cwiseProduct((1.0 - n.value.array().square()).matrix()));
        break;
      case Op::Softmax:
        acc(n.in[0], n.value.cwiseProduct((gi.array() - n.value.dot(gi)).matrix()));
        break;
      case Op::Concat: {
        Eigen::Index off = 0;
        for (Var x : n.in) {
          const auto sz = value(x).size();
          acc(x, gi.segment(off, sz));
          off += sz;
        }
        break;
      }
      case Op::Mean: {
        const Vec d = gi / static_cast<double>(n.in.size());
        for (Var x : n.in) acc(x, d);
        break;
      }
      case Op::Sum:
        acc(n.in[0], Vec::Constant(value(n.in[0]).size(), gi(0)));
        break;
      case Op::MaskedNll: {
        const Vec& z = value(n.in[0]);
        double m = -std::numeric_limits<double>::infinity();
        for (int k : n.aux) m = std::max(m, z(k));
        double s = 0.0;
        for (int k : n.aux) s += std::exp(z(k) - m);
        Vec d = Vec::Zero(z.size());
        for (int k : n.aux) d(k) = std::exp(z(k) - m) / s;
        d(static_cast<Eigen::Index>(n.c)) -= 1.0;
        acc(n.in[0], gi(0) * d);
        break;
      }
      case Op::BceLogits: {
        const double x = value(n.in[0])(0);
        const double p = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        acc(n.in[0], Vec::Constant(1, gi(0) * (p - n.c)));
        break;
      }
    }
  }
}

Vec masked_softmax(const Vec& logits, const std::vector<int>& legal) {
  Vec out = Vec::Zero(logits.size());
  if (legal.empty()) return out;
  double m = -std::numeric_limits<double>::infinity();
  for (int i : legal) m = std::max(m, logits(i));
  double s = 0.0;
  for (int i : legal) s += (out(i) = std::exp(logits(i) - m));
  out /= s;
  return out;
}

// ---------------------------------------------------------------------------

GruParams make_gru(ParamStore& ps, const std::string& prefix, int input, int hidden, Rng& rng) {
  GruParams p;
  p.hidden = hidden;
  p.wz = ps.add(prefix + ".wz", hidden, input, rng);
  p.uz = ps.add(prefix + ".uz", hidden, hidden, rng);
  p.bz = ps.add(prefix + ".bz", hidden, 1, rng, Init::Zero);
  p.wr = ps.add(prefix + ".wr", hidden, input, rng);
  p.ur = ps.add(prefix + ".ur", hidden, hidden, rng);
  p.br = ps.add(prefix + ".br", hidden, 1, rng, Init::Zero);
  p.wn = ps.add(prefix + ".wn", hidden, input, rng);
  p.un = ps.add(prefix + ".un", hidden, hidden, rng);
  p.bn = ps.add(prefix + ".bn", hidden, 1, rng, Init::Zero);
  p.bun = ps.add(prefix + ".bun", hidden, 1, rng, Init::Zero);
  return p;
}

Var gru_cell(Tape& t, const GruParams& p, Var x, Var h) {
  const Var z = t.sigmoid(t.affine({{p.wz, x}, {p.uz, h}}, p.bz));
  const Var r = t.sigmoid(t.affine({{p.wr, x}, {p.ur, h}}, p.br));
  const Var hn = t.linear(p.un, p.bun, h);
  const Var n = t.tanh(t.add(t.linear(p.wn, p.bn, x), t.mul(r, hn)));
  return t.add(t.mul(t.one_minus(z), n), t.mul(z, h));
}

BiGru make_bigru(ParamStore& ps, const std::string& prefix, int input, int hidden, int out, Rng& rng) {
  BiGru b;
  b.fwd = make_gru(ps, prefix + ".fwd", input, hidden, rng);
  b.bwd = make_gru(ps, prefix + ".bwd", input, hidden, rng);
  b.proj_w = ps.add(prefix + ".proj_w", out, 2 * hidden, rng);
  b.proj_b = ps.add(prefix + ".proj_b", out, 1, rng, Init::Zero);
  b.empty = ps.add(prefix + ".empty", out, 1, rng);
  b.out = out;
  return b;
}

Var bi_gru_encode(Tape& t, const BiGru& p, const std::vector<Var>& seq) {
  if (seq.empty()) return t.param(p.empty);
  const Var h0 = t.constant(Vec::Zero(p.fwd.hidden));
  Var hf = h0;
  for (Var x : seq) hf = gru_cell(t, p.fwd, x, hf);
  Var hb = h0;
  for (auto it = seq.rbegin(); it != seq.rend(); ++it) hb = gru_cell(t, p.bwd, *it, hb);
  return t.linear(p.proj_w, p.proj_b, t.concat({hf, hb}));
}

// ---------------------------------------------------------------------------

GradCheckResult grad_check(ParamStore& ps, const std::function<Var(Tape&)>& loss, const GradCheckOptions& opt) {
  ps.zero_grad();
  std::uint64_t base_sig = 0;
  {
    Tape t(ps);
    const Var l = loss(t);
    base_sig = t.kink_signature();
    t.backward(l, ps);
  }
  std::vector<Mat> analytic;
  analytic.reserve(static_cast<std::size_t>(ps.size()));
  for (int i = 0; i < ps.size(); ++i) analytic.push_back(ps.at(i).grad);
  ps.zero_grad();

  auto eval = [&](std::uint64_t& sig) {
    Tape t(ps);
    const Var l = loss(t);
    sig = t.kink_signature();
    return t.scalar(l);
  };

  GradCheckResult res;
  Rng rng(opt.seed);
  std::vector<int> ids = opt.only;
  if (ids.empty())
    for (int i = 0; i < ps.size(); ++i) ids.push_back(i);
  for (int pid : ids) {
    Param& p = ps.at(pid);
    const auto count = p.value.size();
    std::vector<Eigen::Index> coords;
    if (opt.per_param <= 0 || opt.per_param >= count) {
      for (Eigen::Index k = 0; k < count; ++k) coords.push_back(k);
    } else {
      for (int k = 0; k < opt.per_param; ++k) coords.push_back(uniform_int(rng, 0, count - 1));
    }
    for (Eigen::Index k : coords) {
      double& w = p.value.data()[k];
      const double saved = w;
      std::uint64_t s1 = 0, s2 = 0;
      w = saved + opt.eps;
      const double up = eval(s1);
      w = saved - opt.eps;
      const double down = eval(s2);
      w = saved;
      if (s1 != base_sig || s2 != base_sig) {
        ++res.skipped_kinks;
        continue;
      }
      const double num = (up - down) / (2.0 * opt.eps);
      const double a = analytic[static_cast<std::size_t>(pid)].data()[k];
      const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-6});
      ++res.checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        const auto rows = p.value.rows();
        res.worst = p.name + "[" + std::to_string(k % rows) + "," + std::to_string(k / rows) + "]";
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'B', 'L', 'N', 'D', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw ConfigError("truncated checkpoint");
  return v;
}

std::string get_string(std::istream& is) {
  const auto n = get<std::uint32_t>(is);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw ConfigError("truncated checkpoint");
  return s;
}

CheckpointHeader read_header(std::istream& is, const std::string& path) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw ConfigError(path + " is not a checkpoint");
  CheckpointHeader h;
  h.version = get<std::uint32_t>(is);
  if (h.version != 1) throw ConfigError("unsupported checkpoint version " + std::to_string(h.version));
  h.d = get<std::uint32_t>(is);
  h.grammar_hash = get<std::uint64_t>(is);
  h.meta = get_string(is);
  return h;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& ps, const CheckpointHeader& h) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + path);
    os.write(kMagic, 8);
    put<std::uint32_t>(os, h.version);
    put<std::uint32_t>(os, h.d);
    put<std::uint64_t>(os, h.grammar_hash);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(h.meta.size()));
    os.write(h.meta.data(), static_cast<std::streamsize>(h.meta.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(ps.size()));
    for (int i = 0; i < ps.size(); ++i) {
      const Param& p = ps.at(i);
      put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
      os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
      put<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.rows()));
      put<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.cols()));
      os.write(reinterpret_cast<const char*>(p.value.data()),
               static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.value.size())));
    }
    if (!os) throw ConfigError("failed writing " + path);
  }
  std::rename(tmp.c_str(), path.c_str());
}

CheckpointHeader read_checkpoint_header(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  return read_header(is, path);
}

CheckpointHeader load_checkpoint(const std::string& path, ParamStore& ps) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  CheckpointHeader h = read_header(is, path);
  const auto count = get<std::uint32_t>(is);
  if (static_cast<int>(count) != ps.size())
    throw ConfigError("checkpoint has " + std::to_string(count) + " arrays, model expects " +
                      std::to_string(ps.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(is);
    const auto rows = get<std::uint32_t>(is);
    const auto cols = get<std::uint32_t>(is);
    Param& p = ps.at(ps.id(name));
    if (p.value.rows() != rows || p.value.cols() != cols) throw ShapeError("checkpoint shape mismatch for " + name);
    if (!is.read(reinterpret_cast<char*>(p.value.data()),
                 static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.value.size()))))
      throw ConfigError("truncated checkpoint");
  }
  return h;
}

}  // namespace blended::ad
