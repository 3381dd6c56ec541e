#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace dan {

// 64-bit floats by default; finite-difference verification needs the
// headroom. Define DAN_REAL32 to trade precision for speed in deployments
// that do not run the numerical test suites.
#ifdef DAN_REAL32
using real_t = float;
#else
using real_t = double;
#endif

std::string shape_str(const std::vector<int>& shape);

class Tape;
struct OpAccess;

/// Dense row-major tensor. Copies are shallow: they share one storage block
/// holding the values and (once touched by backward) the gradient. A tensor
/// produced while a Tape is active carries a link to its tape node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<real_t> values);

  static Tensor scalar(real_t v);
  static Tensor full(std::vector<int> shape, real_t v);
  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  bool defined() const { return st_ != nullptr; }
  const std::vector<int>& shape() const { return shape_; }
  int64_t size() const;
  bool is_scalar() const { return size() == 1; }

  real_t* data();
  const real_t* data() const;
  std::vector<real_t> to_vector() const;

  /// value of a single-element tensor
  real_t value() const;
  real_t at(int i) const;
  real_t at(int i, int j) const;

  bool has_grad() const;
  /// gradient buffer, allocated zero-filled on first access
  real_t* grad();
  const real_t* grad_data() const;  // nullptr when absent
  real_t grad_at(int i) const;
  std::vector<real_t> grad_vector() const;
  void clear_grad();

  /// id of the tape node that produced (or watches) this tensor, -1 if none
  int node() const { return node_; }
  uint64_t tape_id() const { return tape_id_; }

 private:
  struct Storage {
    std::vector<real_t> value;
    std::vector<real_t> grad;  // empty until backward touches it
  };

  std::vector<int> shape_;
  std::shared_ptr<Storage> st_;
  int node_ = -1;
  uint64_t tape_id_ = 0;

  friend class Tape;
  friend struct OpAccess;
};

/// Define-by-run record of primitive applications. Rebuilt per batch. The
/// node list is topologically ordered by construction; backward walks it
/// once in reverse. One tape belongs to one execution context.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  /// Register a leaf for gradient tracking. Watched leaves are guaranteed a
  /// (possibly all-zero) gradient after backward.
  void watch(Tensor& t);

  /// Accumulate d(loss)/d(leaf) into every tracked tensor. loss must be a
  /// scalar produced under this tape.
  void backward(const Tensor& loss);

  int node_count() const { return static_cast<int>(pulls_.size()); }
  uint64_t id() const { return id_; }

  /// RAII activation: primitives record onto the innermost active tape.
  class Scope {
   public:
    explicit Scope(Tape& t);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* prev_;
  };

  static Tape* active();

  /// Used by primitive implementations: assign out a node id and append its
  /// pull closure (which routes out's gradient to the inputs).
  void record(Tensor& out, std::function<void()> pull);

 private:
  int assign_node(Tensor& t);

  std::vector<std::function<void()>> pulls_;
  std::vector<std::shared_ptr<Tensor::Storage>> watched_;
  int next_node_ = 0;
  uint64_t id_;
};

/// Convenience: backward on the innermost active tape. Throws when no tape
/// is active.
void backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Primitives. Each checks its shape rules, computes the forward value and,
// when a tape is active, records the matching reverse-mode rule.
// ---------------------------------------------------------------------------

/// (m,k)x(k,n) -> (m,n); (m,k)x(k,) -> (m,)
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
/// elementwise product, same shapes
Tensor mul(const Tensor& a, const Tensor& b);
/// 1-D concatenation
Tensor concat(const Tensor& a, const Tensor& b);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
/// natural log; rejects non-positive inputs (see clamp_min for loss paths)
Tensor ln(const Tensor& x);
/// 1-D: softmax over the vector; 2-D: softmax per row
Tensor softmax(const Tensor& x);
/// full reduction to a scalar
Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor scalar_mul(const Tensor& x, real_t c);

/// Identity forward; backward scales the upstream gradient by -lambda.
Tensor reverse_gradient(const Tensor& x, real_t lambda);

// Plumbing ops used by loss/layer code (same recording discipline).
/// elementwise max(x, lo); gradient passes only where x > lo
Tensor clamp_min(const Tensor& x, real_t lo);
/// stack n equal-length vectors into an (n,d) matrix
Tensor stack_rows(const std::vector<Tensor>& rows);
/// 2-D transpose
Tensor transpose(const Tensor& x);

/// Primitive kinds, for code that drives the op set generically (e.g. the
/// gradient-oracle sweep).
enum class OpKind {
  MatMul,
  Add,
  Mul,
  Concat,
  Sigmoid,
  Tanh,
  Relu,
  Ln,
  Softmax,
  Mean,
  Sum,
  ScalarMul,
};

/// Dispatch a primitive by kind. `c` is the coefficient for ScalarMul.
Tensor forward_primitive(OpKind kind, const std::vector<Tensor>& inputs, real_t c = 1.0);

bool all_finite(const Tensor& t);

}  // namespace dan
