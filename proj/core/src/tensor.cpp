#include "dan/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dan {

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {

int64_t shape_numel(const std::vector<int>& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one dimension");
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

}  // namespace

struct OpAccess {
  using Storage = Tensor::Storage;

  static const std::shared_ptr<Storage>& st(const Tensor& t) { return t.st_; }

  static void ensure_grad(Storage& s) {
    if (s.grad.empty()) s.grad.assign(s.value.size(), real_t(0));
  }
};

using Storage = OpAccess::Storage;

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  int64_t n = shape_numel(shape_);
  st_ = std::make_shared<Storage>();
  st_->value.assign(static_cast<size_t>(n), real_t(0));
}

Tensor::Tensor(std::vector<int> shape, std::vector<real_t> values) : shape_(std::move(shape)) {
  int64_t n = shape_numel(shape_);
  if (n != static_cast<int64_t>(values.size()))
    throw std::invalid_argument("tensor data length " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape_));
  st_ = std::make_shared<Storage>();
  st_->value = std::move(values);
}

Tensor Tensor::scalar(real_t v) { return Tensor({1}, {v}); }

Tensor Tensor::full(std::vector<int> shape, real_t v) {
  Tensor t(std::move(shape));
  std::fill(t.st_->value.begin(), t.st_->value.end(), v);
  return t;
}

int64_t Tensor::size() const { return st_ ? static_cast<int64_t>(st_->value.size()) : 0; }

real_t* Tensor::data() { return st_->value.data(); }
const real_t* Tensor::data() const { return st_->value.data(); }

std::vector<real_t> Tensor::to_vector() const { return st_->value; }

real_t Tensor::value() const {
  if (size() != 1) throw std::invalid_argument("value(): tensor has shape " + shape_str(shape_) + ", expected a scalar");
  return st_->value[0];
}

real_t Tensor::at(int i) const { return st_->value.at(static_cast<size_t>(i)); }

real_t Tensor::at(int i, int j) const {
  if (shape_.size() != 2) throw std::invalid_argument("at(i,j) on tensor of shape " + shape_str(shape_));
  return st_->value.at(static_cast<size_t>(i) * shape_[1] + j);
}

bool Tensor::has_grad() const { return st_ && !st_->grad.empty(); }

real_t* Tensor::grad() {
  OpAccess::ensure_grad(*st_);
  return st_->grad.data();
}

const real_t* Tensor::grad_data() const { return has_grad() ? st_->grad.data() : nullptr; }

real_t Tensor::grad_at(int i) const {
  if (!has_grad()) return real_t(0);
  return st_->grad.at(static_cast<size_t>(i));
}

std::vector<real_t> Tensor::grad_vector() const {
  if (!has_grad()) return std::vector<real_t>(static_cast<size_t>(size()), real_t(0));
  return st_->grad;
}

void Tensor::clear_grad() {
  if (st_) st_->grad.clear();
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

namespace {
thread_local Tape* g_active_tape = nullptr;
uint64_t next_tape_id() {
  static std::atomic<uint64_t> counter{1};
  return counter.fetch_add(1);
}
}  // namespace

Tape::Tape() : id_(next_tape_id()) {}
Tape::~Tape() = default;

Tape* Tape::active() { return g_active_tape; }

Tape::Scope::Scope(Tape& t) : prev_(g_active_tape) { g_active_tape = &t; }
Tape::Scope::~Scope() { g_active_tape = prev_; }

int Tape::assign_node(Tensor& t) {
  t.node_ = next_node_++;
  t.tape_id_ = id_;
  return t.node_;
}

void Tape::watch(Tensor& t) {
  if (!t.defined()) throw std::invalid_argument("watch: undefined tensor");
  assign_node(t);
  watched_.push_back(t.st_);
}

void Tape::record(Tensor& out, std::function<void()> pull) {
  assign_node(out);
  pulls_.push_back(std::move(pull));
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                (loss.defined() ? shape_str(loss.shape()) : std::string("(undefined)")));
  if (loss.tape_id_ != id_ || loss.node_ < 0)
    throw std::invalid_argument("backward: loss was not produced under this tape");

  loss.st_->grad.assign(1, real_t(1));
  for (auto it = pulls_.rbegin(); it != pulls_.rend(); ++it) (*it)();
  // untouched leaves still report an exact zero gradient
  for (auto& st : watched_) OpAccess::ensure_grad(*st);
}

void backward(const Tensor& loss) {
  Tape* t = Tape::active();
  if (!t) throw std::invalid_argument("backward: no active tape");
  t->backward(loss);
}

// ---------------------------------------------------------------------------
// primitive helpers
// ---------------------------------------------------------------------------

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

void maybe_record(Tensor& out, std::function<void()> pull) {
  if (Tape* t = Tape::active()) t->record(out, std::move(pull));
}

real_t stable_sigmoid(real_t x) {
  if (x >= 0) {
    real_t e = std::exp(-x);
    return real_t(1) / (real_t(1) + e);
  }
  real_t e = std::exp(x);
  return e / (real_t(1) + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// primitives
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2)
    throw std::invalid_argument("matmul: left operand must be 2-D, got " + shape_str(a.shape()));
  const int m = a.shape()[0];
  const int k = a.shape()[1];

  if (b.shape().size() == 2) {
    if (b.shape()[0] != k)
      throw std::invalid_argument("matmul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const int n = b.shape()[1];
    Tensor out({m, n});
    const real_t* A = a.data();
    const real_t* B = b.data();
    real_t* C = out.data();
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < k; ++p) {
        real_t av = A[i * k + p];
        for (int j = 0; j < n; ++j) C[i * n + j] += av * B[p * n + j];
      }
    auto as = OpAccess::st(a), bs = OpAccess::st(b), os = OpAccess::st(out);
    maybe_record(out, [as, bs, os, m, k, n] {
      if (os->grad.empty()) return;
      OpAccess::ensure_grad(*as);
      OpAccess::ensure_grad(*bs);
      const real_t* G = os->grad.data();
      const real_t* A = as->value.data();
      const real_t* B = bs->value.data();
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          real_t acc = 0;
          for (int j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
          as->grad[i * k + p] += acc;
        }
      for (int p = 0; p < k; ++p)
        for (int j = 0; j < n; ++j) {
          real_t acc = 0;
          for (int i = 0; i < m; ++i) acc += A[i * k + p] * G[i * n + j];
          bs->grad[p * n + j] += acc;
        }
    });
    return out;
  }

  if (b.shape().size() == 1) {
    if (b.shape()[0] != k)
      throw std::invalid_argument("matmul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out({m});
    const real_t* A = a.data();
    const real_t* x = b.data();
    real_t* y = out.data();
    for (int i = 0; i < m; ++i) {
      real_t acc = 0;
      for (int p = 0; p < k; ++p) acc += A[i * k + p] * x[p];
      y[i] = acc;
    }
    auto as = OpAccess::st(a), bs = OpAccess::st(b), os = OpAccess::st(out);
    maybe_record(out, [as, bs, os, m, k] {
      if (os->grad.empty()) return;
      OpAccess::ensure_grad(*as);
      OpAccess::ensure_grad(*bs);
      const real_t* G = os->grad.data();
      const real_t* A = as->value.data();
      const real_t* x = bs->value.data();
      for (int i = 0; i < m; ++i) {
        real_t g = G[i];
        for (int p = 0; p < k; ++p) {
          as->grad[i * k + p] += g * x[p];
          bs->grad[p] += g * A[i * k + p];
        }
      }
    });
    return out;
  }

  throw std::invalid_argument("matmul: right operand must be 1-D or 2-D, got " + shape_str(b.shape()));
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  auto as = OpAccess::st(a), bs = OpAccess::st(b), os = OpAccess::st(out);
  maybe_record(out, [as, bs, os, n] {
    if (os->grad.empty()) return;
    OpAccess::ensure_grad(*as);
    OpAccess::ensure_grad(*bs);
    for (int64_t i = 0; i < n; ++i) {
      as->grad[i] += os->grad[i];
      bs->grad[i] += os->grad[i];
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("elementwise-mul", a, b);
  Tensor out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  auto as = OpAccess::st(a), bs = OpAccess::st(b), os = OpAccess::st(out);
  maybe_record(out, [as, bs, os, n] {
    if (os->grad.empty()) return;
    OpAccess::ensure_grad(*as);
    OpAccess::ensure_grad(*bs);
    for (int64_t i = 0; i < n; ++i) {
      as->grad[i] += os->grad[i] * bs->value[i];
      bs->grad[i] += os->grad[i] * as->value[i];
    }
  });
  return out;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 1 || b.shape().size() != 1)
    throw std::invalid_argument("concat: expects two vectors, got " + shape_str(a.shape()) + " and " +
                                shape_str(b.shape()));
  const int p = a.shape()[0], q = b.shape()[0];
  Tensor out({p + q});
  std::copy(a.data(), a.data() + p, out.data());
  std::copy(b.data(), b.data() + q, out.data() + p);
  auto as = OpAccess::st(a), bs = OpAccess::st(b), os = OpAccess::st(out);
  maybe_record(out, [as, bs, os, p, q] {
    if (os->grad.empty()) return;
    OpAccess::ensure_grad(*as);
    OpAccess::ensure_grad(*bs);
    for (int i = 0; i < p; ++i) as->grad[i] += os->grad[i];
    for (int i = 0; i < q; ++i) bs->grad[i] += os->grad[p + i];
  });
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = stable_sigmoid(x.data()[i]);
  auto xs = OpAccess::st(x), os = OpAccess::st(out);
  maybe_record(out, [xs, os, n] {
    if (os->grad.empty()) return;
    OpAccess::ensure_grad(*xs);
    for (int64_t i = 0; i < n; ++i) {
      real_t y = os->value[i];
      xs->grad[i] += os->grad[i] * y * (real_t(1) - y);
    }
  });
  return out;
}

Tensor tanh(const Tensor& x) {
  Tensor out(x.shape());
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = std::tanh(x.data()[i]);
  auto xs = OpAccess::st(x), os = OpAccess::st(out);
  maybe_record(out, [xs, os, n] {
    if (os->grad.empty()) return;
    OpAccess::ensure_grad(*xs);
    for (int64_t i = 0; i < n; ++i) {
      real_t y = os->value[i];
      xs->grad[i] += os->grad[i] * (real_t(1) - y * y);
    }
  });
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] > 0 ? x.data()[i] : real_t(0);
  auto xs = OpAccess::st(x), os = OpAccess::st(out);
  maybe_record(out, [xs, os, n] {
    if (os->grad.empty()) return;
    OpAccess::ensure_grad(*xs);
    for (int64_t i = 0; i < n; ++i)
      if (xs->value[i] > 0) xs->grad[i] += os->grad[i];
  });
  return out;
}

Tensor ln(const Tensor& x) {
  Tensor out(x.shape());
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) {
    real_t v = x.data()[i];
    if (!(v > 0))
      throw std::domain_error("ln: input must be strictly positive, got " + std::to_string(v) + " at index " +
                              std::to_string(i));
    out.data()[i] = std::log(v);
  }
  auto xs = OpAccess::st(x), os = OpAccess::st(out);
  maybe_record(out, [xs, os, n] {
    if (os->grad.empty()) return;
    OpAccess::ensure_grad(*xs);
    for (int64_t i = 0; i < n; ++i) xs->grad[i] += os->grad[i] / xs->value[i];
  });
  return out;
}

Tensor softmax(const Tensor& x) {
  int rows, cols;
  if (x.shape().size() == 1) {
    rows = 1;
    cols = x.shape()[0];
  } else if (x.shape().size() == 2) {
    rows = x.shape()[0];
    cols = x.shape()[1];
  } else {
    throw std::invalid_argument("softmax: expects 1-D or 2-D input, got " + shape_str(x.shape()));
  }
  Tensor out(x.shape());
  for (int r = 0; r < rows; ++r) {
    const real_t* in = x.data() + static_cast<int64_t>(r) * cols;
    real_t* o = out.data() + static_cast<int64_t>(r) * cols;
    real_t mx = in[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
    real_t denom = 0;
    for (int j = 0; j < cols; ++j) {
      o[j] = std::exp(in[j] - mx);
      denom += o[j];
    }
    for (int j = 0; j < cols; ++j) o[j] /= denom;
  }
  auto xs = OpAccess::st(x), os = OpAccess::st(out);
  maybe_record(out, [xs, os, rows, cols] {
    if (os->grad.empty()) return;
    OpAccess::ensure_grad(*xs);
    for (int r = 0; r < rows; ++r) {
      const real_t* y = os->value.data() + static_cast<int64_t>(r) * cols;
      const real_t* dy = os->grad.data() + static_cast<int64_t>(r) * cols;
      real_t dot = 0;
      for (int j = 0; j < cols; ++j) dot += dy[j] * y[j];
      real_t* dx = xs->grad.data() + static_cast<int64_t>(r) * cols;
      for (int j = 0; j < cols; ++j) dx[j] += y[j] * (dy[j] - dot);
    }
  });
  return out;
}

Tensor mean(const Tensor& x) {
  const int64_t n = x.size();
  real_t acc = 0;
  for (int64_t i = 0; i < n; ++i) acc += x.data()[i];
  Tensor out = Tensor::scalar(acc / static_cast<real_t>(n));
  auto xs = OpAccess::st(x), os = OpAccess::st(out);
  maybe_record(out, [xs, os, n] {
    if (os->grad.empty()) return;
    OpAccess::ensure_grad(*xs);
    real_t g = os->grad[0] / static_cast<real_t>(n);
    for (int64_t i = 0; i < n; ++i) xs->grad[i] += g;
  });
  return out;
}

Tensor sum(const Tensor& x) {
  const int64_t n = x.size();
  real_t acc = 0;
  for (int64_t i = 0; i < n; ++i) acc += x.data()[i];
  Tensor out = Tensor::scalar(acc);
  auto xs = OpAccess::st(x), os = OpAccess::st(out);
  maybe_record(out, [xs, os, n] {
    if (os->grad.empty()) return;
    OpAccess::ensure_grad(*xs);
    for (int64_t i = 0; i < n; ++i) xs->grad[i] += os->grad[0];
  });
  return out;
}

Tensor scalar_mul(const Tensor& x, real_t c) {
  Tensor out(x.shape());
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = c * x.data()[i];
  auto xs = OpAccess::st(x), os = OpAccess::st(out);
  maybe_record(out, [xs, os, n, c] {
    if (os->grad.empty()) return;
    OpAccess::ensure_grad(*xs);
    for (int64_t i = 0; i < n; ++i) xs->grad[i] += c * os->grad[i];
  });
  return out;
}

Tensor reverse_gradient(const Tensor& x, real_t lambda) {
  Tensor out(x.shape(), x.to_vector());
  const int64_t n = x.size();
  auto xs = OpAccess::st(x), os = OpAccess::st(out);
  maybe_record(out, [xs, os, n, lambda] {
    if (os->grad.empty()) return;
    OpAccess::ensure_grad(*xs);
    for (int64_t i = 0; i < n; ++i) xs->grad[i] += -lambda * os->grad[i];
  });
  return out;
}

Tensor clamp_min(const Tensor& x, real_t lo) {
  Tensor out(x.shape());
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = std::max(x.data()[i], lo);
  auto xs = OpAccess::st(x), os = OpAccess::st(out);
  maybe_record(out, [xs, os, n, lo] {
    if (os->grad.empty()) return;
    OpAccess::ensure_grad(*xs);
    for (int64_t i = 0; i < n; ++i)
      if (xs->value[i] > lo) xs->grad[i] += os->grad[i];
  });
  return out;
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: empty row list");
  const int d = rows[0].shape().size() == 1 ? rows[0].shape()[0] : -1;
  if (d < 0) throw std::invalid_argument("stack_rows: rows must be vectors");
  const int n = static_cast<int>(rows.size());
  Tensor out({n, d});
  for (int i = 0; i < n; ++i) {
    if (rows[i].shape().size() != 1 || rows[i].shape()[0] != d)
      throw std::invalid_argument("stack_rows: row " + std::to_string(i) + " has shape " +
                                  shape_str(rows[i].shape()) + ", expected (" + std::to_string(d) + ")");
    std::copy(rows[i].data(), rows[i].data() + d, out.data() + static_cast<int64_t>(i) * d);
  }
  std::vector<std::shared_ptr<Storage>> srcs;
  srcs.reserve(rows.size());
  for (const auto& r : rows) srcs.push_back(OpAccess::st(r));
  auto os = OpAccess::st(out);
  maybe_record(out, [srcs, os, n, d] {
    if (os->grad.empty()) return;
    for (int i = 0; i < n; ++i) {
      OpAccess::ensure_grad(*srcs[i]);
      for (int j = 0; j < d; ++j) srcs[i]->grad[j] += os->grad[static_cast<int64_t>(i) * d + j];
    }
  });
  return out;
}

Tensor transpose(const Tensor& x) {
  if (x.shape().size() != 2) throw std::invalid_argument("transpose: expects 2-D input, got " + shape_str(x.shape()));
  const int r = x.shape()[0], c = x.shape()[1];
  Tensor out({c, r});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.data()[static_cast<int64_t>(j) * r + i] = x.data()[static_cast<int64_t>(i) * c + j];
  auto xs = OpAccess::st(x), os = OpAccess::st(out);
  maybe_record(out, [xs, os, r, c] {
    if (os->grad.empty()) return;
    OpAccess::ensure_grad(*xs);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j)
        xs->grad[static_cast<int64_t>(i) * c + j] += os->grad[static_cast<int64_t>(j) * r + i];
  });
  return out;
}

Tensor forward_primitive(OpKind kind, const std::vector<Tensor>& inputs, real_t c) {
  auto need = [&](size_t n) {
    if (inputs.size() != n)
      throw std::invalid_argument("forward_primitive: expected " + std::to_string(n) + " inputs, got " +
                                  std::to_string(inputs.size()));
  };
  switch (kind) {
    case OpKind::MatMul:
      need(2);
      return matmul(inputs[0], inputs[1]);
    case OpKind::Add:
      need(2);
      return add(inputs[0], inputs[1]);
    case OpKind::Mul:
      need(2);
      return mul(inputs[0], inputs[1]);
    case OpKind::Concat:
      need(2);
      return concat(inputs[0], inputs[1]);
    case OpKind::Sigmoid:
      need(1);
      return sigmoid(inputs[0]);
    case OpKind::Tanh:
      need(1);
      return tanh(inputs[0]);
    case OpKind::Relu:
      need(1);
      return relu(inputs[0]);
    case OpKind::Ln:
      need(1);
      return ln(inputs[0]);
    case OpKind::Softmax:
      need(1);
      return softmax(inputs[0]);
    case OpKind::Mean:
      need(1);
      return mean(inputs[0]);
    case OpKind::Sum:
      need(1);
      return sum(inputs[0]);
    case OpKind::ScalarMul:
      need(1);
      return scalar_mul(inputs[0], c);
  }
  throw std::invalid_argument("forward_primitive: unknown op kind");
}

bool all_finite(const Tensor& t) {
  const int64_t n = t.size();
  for (int64_t i = 0; i < n; ++i)
    if (!std::isfinite(t.data()[i])) return false;
  return true;
}

}  // namespace dan
