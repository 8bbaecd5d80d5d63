#include "ridgelab/numerics/ops.hpp"

#include <cmath>
#include <string>

#include "ridgelab/errors.hpp"
#include "ridgelab/numerics/kernels.hpp"

namespace ridgelab::ad {

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw ContractViolation(std::string(op) + ": operands on different tapes");
  }
  return *a.tape();
}

Tape& tape_of(Var a, const char* op) {
  if (a.tape() == nullptr) throw ContractViolation(std::string(op) + ": unbound Var");
  return *a.tape();
}

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ContractViolation("matmul: inner dimensions differ (" + shape(av) + " * " + shape(bv) +
                            ")");
  }
  Matrix out = av * bv;
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, Matrix(g * b.value().transpose()));
    if (tp.requires_grad(b)) tp.accumulate(b, Matrix(a.value().transpose() * g));
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a, "transpose");
  Matrix out = a.value().transpose();
  return t.record(std::move(out), {a},
                  [a](Tape& tp, const Matrix& g) { tp.accumulate(a, g.transpose()); });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value() + b.value();
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value() - b.value();
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    if (tp.requires_grad(b)) tp.accumulate(b, -g);
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = same_tape(a, b, "hadamard");
  require_same_shape(a.value(), b.value(), "hadamard");
  Matrix out = a.value().cwiseProduct(b.value());
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, g.cwiseProduct(b.value()));
    if (tp.requires_grad(b)) tp.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var add_row(Var x, Var row) {
  Tape& t = same_tape(x, row, "add_row");
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != x.value().cols()) {
    throw ContractViolation("add_row: row is " + shape(rv) + ", expected 1x" +
                            std::to_string(x.value().cols()));
  }
  Matrix out = x.value().rowwise() + rv.row(0);
  return t.record(std::move(out), {x, row}, [x, row](Tape& tp, const Matrix& g) {
    tp.accumulate(x, g);
    if (tp.requires_grad(row)) tp.accumulate(row, g.colwise().sum());
  });
}

Var scale(Var x, Var s) {
  Tape& t = same_tape(x, s, "scale");
  const Matrix& sv = s.value();
  if (sv.rows() != 1 || sv.cols() != 1) {
    throw ContractViolation("scale: factor is " + shape(sv) + ", expected 1x1");
  }
  Matrix out = x.value() * sv(0, 0);
  return t.record(std::move(out), {x, s}, [x, s](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(x)) tp.accumulate(x, g * s.value()(0, 0));
    if (tp.requires_grad(s)) {
      Matrix ds(1, 1);
      ds(0, 0) = g.cwiseProduct(x.value()).sum();
      tp.accumulate(s, ds);
    }
  });
}

Var row_softmax(Var x) {
  Tape& t = tape_of(x, "row_softmax");
  Matrix out = kernels::row_softmax(x.value());
  Matrix p = out;
  return t.record(std::move(out), {x}, [x, p = std::move(p)](Tape& tp, const Matrix& g) {
    const Eigen::VectorXd dot = g.cwiseProduct(p).rowwise().sum();
    Matrix dx = p.cwiseProduct(g.colwise() - dot);
    tp.accumulate(x, std::move(dx));
  });
}

Var layer_normalize(Var x, Var gain, Var shift) {
  Tape& t = same_tape(x, gain, "layer_normalize");
  same_tape(x, shift, "layer_normalize");
  const Matrix& xv = x.value();
  Matrix out = kernels::layer_normalize(xv, gain.value(), shift.value());
  if (!t.recording()) return t.record(std::move(out), {x, gain, shift}, {});

  // Saved normalized activations and inverse deviations for the backward pass.
  const Eigen::Index n = xv.cols();
  Matrix xhat(xv.rows(), n);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mean = xv.row(r).sum() / static_cast<double>(n);
    const auto centered = xv.row(r).array() - mean;
    const double var = centered.square().sum() / static_cast<double>(n);
    inv_std(r) = 1.0 / std::sqrt(var + kernels::kLayerNormEps);
    xhat.row(r) = centered * inv_std(r);
  }
  return t.record(
      std::move(out), {x, gain, shift},
      [x, gain, shift, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tp,
                                                                              const Matrix& g) {
        if (tp.requires_grad(x)) {
          const Matrix dxhat = g.array().rowwise() * gain.value().row(0).array();
          const Eigen::VectorXd mean_d = dxhat.rowwise().mean();
          const Eigen::VectorXd mean_dx = dxhat.cwiseProduct(xhat).rowwise().mean();
          Matrix dx(xhat.rows(), xhat.cols());
          for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
            dx.row(r) =
                inv_std(r) * (dxhat.row(r).array() - mean_d(r) - xhat.row(r).array() * mean_dx(r));
          }
          tp.accumulate(x, std::move(dx));
        }
        if (tp.requires_grad(gain)) tp.accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
        if (tp.requires_grad(shift)) tp.accumulate(shift, g.colwise().sum());
      });
}

Var exp(Var x) {
  Tape& t = tape_of(x, "exp");
  Matrix out = x.value().array().exp().matrix();
  Matrix saved = out;
  return t.record(std::move(out), {x}, [x, saved = std::move(saved)](Tape& tp, const Matrix& g) {
    tp.accumulate(x, g.cwiseProduct(saved));
  });
}

Var log(Var x) {
  Tape& t = tape_of(x, "log");
  if ((x.value().array() <= 0.0).any()) throw NumericalError("log: non-positive entry");
  Matrix out = x.value().array().log().matrix();
  return t.record(std::move(out), {x}, [x](Tape& tp, const Matrix& g) {
    tp.accumulate(x, g.cwiseQuotient(x.value()));
  });
}

Var gelu(Var x) {
  Tape& t = tape_of(x, "gelu");
  if (!t.recording()) return t.record(kernels::gelu(x.value()), {x}, {});
  static constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  const Matrix& xv = x.value();
  Matrix th = kernels::gelu_tanh(xv);
  Matrix out = (0.5 * xv.array() * (1.0 + th.array())).matrix();
  return t.record(std::move(out), {x}, [x, th = std::move(th)](Tape& tp, const Matrix& g) {
    const auto v = x.value().array();
    const auto tv = th.array();
    Matrix dx = (g.array() * (0.5 * (1.0 + tv) +
                              0.5 * v * (1.0 - tv.square()) * c * (1.0 + 3.0 * 0.044715 * v.square())))
                    .matrix();
    tp.accumulate(x, std::move(dx));
  });
}

Var sum(Var x) {
  Tape& t = tape_of(x, "sum");
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return t.record(std::move(out), {x}, [x](Tape& tp, const Matrix& g) {
    tp.accumulate(x, Matrix::Constant(x.value().rows(), x.value().cols(), g(0, 0)));
  });
}

Var gather_rows(Var table, std::span<const int> ids) {
  Tape& t = tape_of(table, "gather_rows");
  Matrix out = kernels::gather_rows(table.value(), ids);
  std::vector<int> saved(ids.begin(), ids.end());
  return t.record(std::move(out), {table},
                  [table, saved = std::move(saved)](Tape& tp, const Matrix& g) {
                    Matrix dt = Matrix::Zero(table.value().rows(), table.value().cols());
                    for (std::size_t i = 0; i < saved.size(); ++i) {
                      dt.row(saved[i]) += g.row(static_cast<Eigen::Index>(i));
                    }
                    tp.accumulate(table, std::move(dt));
                  });
}

Var causal_attention(Var qkv, int n_heads, int seq_len, std::vector<Matrix>* probs) {
  Tape& t = tape_of(qkv, "causal_attention");
  const Matrix& in = qkv.value();
  RIDGELAB_REQUIRE(n_heads >= 1 && seq_len >= 1, "causal_attention: bad head/sequence count");
  RIDGELAB_REQUIRE(in.cols() % (3 * n_heads) == 0,
                   "causal_attention: width not divisible by 3 * n_heads");
  RIDGELAB_REQUIRE(in.rows() % seq_len == 0,
                   "causal_attention: rows not a multiple of the sequence length");
  const Eigen::Index d = in.cols() / 3;
  const Eigen::Index dh = d / n_heads;
  const Eigen::Index T = seq_len;
  const Eigen::Index n_seq = in.rows() / T;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<Matrix> p_all(static_cast<std::size_t>(n_seq * n_heads));
  Matrix out(in.rows(), d);
  for (Eigen::Index s = 0; s < n_seq; ++s) {
    for (Eigen::Index h = 0; h < n_heads; ++h) {
      const auto q = in.block(s * T, h * dh, T, dh);
      const auto k = in.block(s * T, d + h * dh, T, dh);
      const auto v = in.block(s * T, 2 * d + h * dh, T, dh);
      Matrix scores = (q * k.transpose()) * inv_sqrt;
      for (Eigen::Index i = 0; i < T; ++i) {
        const double mx = scores.row(i).head(i + 1).maxCoeff();
        double total = 0.0;
        for (Eigen::Index j = 0; j <= i; ++j) {
          scores(i, j) = std::exp(scores(i, j) - mx);
          total += scores(i, j);
        }
        for (Eigen::Index j = 0; j <= i; ++j) scores(i, j) /= total;
        for (Eigen::Index j = i + 1; j < T; ++j) scores(i, j) = 0.0;
      }
      out.block(s * T, h * dh, T, dh).noalias() = scores * v;
      p_all[static_cast<std::size_t>(s * n_heads + h)] = std::move(scores);
    }
  }
  if (probs != nullptr) *probs = p_all;
  if (!t.recording()) return t.record(std::move(out), {qkv}, {});

  return t.record(
      std::move(out), {qkv},
      [qkv, n_heads, T, n_seq, d, dh, inv_sqrt, p_all = std::move(p_all)](Tape& tp,
                                                                          const Matrix& g) {
        const Matrix& in = qkv.value();
        Matrix dqkv = Matrix::Zero(in.rows(), in.cols());
        for (Eigen::Index s = 0; s < n_seq; ++s) {
          for (Eigen::Index h = 0; h < n_heads; ++h) {
            const Matrix& p = p_all[static_cast<std::size_t>(s * n_heads + h)];
            const auto q = in.block(s * T, h * dh, T, dh);
            const auto k = in.block(s * T, d + h * dh, T, dh);
            const auto v = in.block(s * T, 2 * d + h * dh, T, dh);
            const auto go = g.block(s * T, h * dh, T, dh);
            const Matrix dp = go * v.transpose();
            const Eigen::VectorXd dot = dp.cwiseProduct(p).rowwise().sum();
            const Matrix ds = p.cwiseProduct(dp.colwise() - dot) * inv_sqrt;
            dqkv.block(s * T, h * dh, T, dh).noalias() += ds * k;
            dqkv.block(s * T, d + h * dh, T, dh).noalias() += ds.transpose() * q;
            dqkv.block(s * T, 2 * d + h * dh, T, dh).noalias() += p.transpose() * go;
          }
        }
        tp.accumulate(qkv, std::move(dqkv));
      });
}

Var cross_entropy(Var logits, std::span<const int> targets) {
  Tape& t = tape_of(logits, "cross_entropy");
  const Matrix& z = logits.value();
  RIDGELAB_REQUIRE(static_cast<Eigen::Index>(targets.size()) == z.rows(),
                   "cross_entropy: one target per row required");
  RIDGELAB_REQUIRE(z.rows() > 0, "cross_entropy: empty batch");
  Matrix p = kernels::row_softmax(z);
  double total = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int y = targets[static_cast<std::size_t>(r)];
    if (y < 0 || y >= z.cols()) {
      throw ContractViolation("cross_entropy: target " + std::to_string(y) + " out of range");
    }
    const double mx = z.row(r).maxCoeff();
    const double lse = mx + std::log((z.row(r).array() - mx).exp().sum());
    total += lse - z(r, y);
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(z.rows());
  std::vector<int> saved(targets.begin(), targets.end());
  return t.record(std::move(out), {logits},
                  [logits, p = std::move(p), saved = std::move(saved)](Tape& tp, const Matrix& g) {
                    Matrix dz = p;
                    for (std::size_t r = 0; r < saved.size(); ++r) {
                      dz(static_cast<Eigen::Index>(r), saved[r]) -= 1.0;
                    }
                    dz *= g(0, 0) / static_cast<double>(saved.size());
                    tp.accumulate(logits, std::move(dz));
                  });
}

}  // namespace ridgelab::ad
