#include "craft/autograd.hpp"

#include <cmath>
#include <memory>
#include <sstream>

#include "craft/error.hpp"

namespace craft {
namespace ad {

const Mat& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Mat& v = value();
  if (v.size() != 1) throw DimensionError("Var::scalar on non-1x1 value");
  return v(0, 0);
}

Var Tape::constant(Mat value) {
  nodes_.push_back(Node{std::move(value), Mat(), nullptr, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(ParamTensor& p) {
  nodes_.push_back(Node{p.value, Mat(), nullptr, &p, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(Mat value, std::initializer_list<Var> parents, Backward back) {
  return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(back));
}

Var Tape::push(Mat value, std::span<const Var> parents, Backward back) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape() != this) throw Error("autograd: mixing tapes");
    needs = needs || nodes_[p.id()].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), Mat(), needs ? std::move(back) : nullptr, nullptr, needs});
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Mat& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::accumulate_block(std::size_t id, Eigen::Index row, Eigen::Index col, const Mat& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  n.grad.block(row, col, g.rows(), g.cols()) += g;
}

void Tape::backward(const Var& loss) {
  if (loss.tape() != this) throw Error("autograd: loss from another tape");
  if (nodes_[loss.id()].value.size() != 1) throw DimensionError("backward: loss must be 1x1");
  nodes_[loss.id()].grad = Mat::Ones(1, 1);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.back) n.back(*this, i);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

namespace {

void require(bool ok, const char* op, const Var& a, const Var& b) {
  if (ok) return;
  std::ostringstream os;
  os << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
     << b.cols();
  throw DimensionError(os.str());
}

}  // namespace

Var bind(Tape& t, ParamTensor& p, bool trainable) {
  return trainable ? t.param(p) : t.constant(p.value);
}

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), "matmul", a, b);
  Tape& t = *a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(a.value() * b.value(), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.needs_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add", a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

Var sub(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub", a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    if (t.needs_grad(ib)) t.accumulate(ib, -t.grad(self));
  });
}

Var scale(const Var& a, double s) {
  const std::size_t ia = a.id();
  return a.tape()->push(a.value() * s, {a},
                        [ia, s](Tape& t, std::size_t self) { t.accumulate(ia, t.grad(self) * s); });
}

Var scale_rows(const Var& a, const Vec& w) {
  if (w.size() != a.rows()) throw DimensionError("scale_rows: one weight per row");
  Mat out = w.asDiagonal() * a.value();
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(out), {a}, [ia, w](Tape& t, std::size_t self) {
    t.accumulate(ia, w.asDiagonal() * t.grad(self));
  });
}

Var add_bias(const Var& a, const Var& bias) {
  require(bias.rows() == 1 && bias.cols() == a.cols(), "add_bias", a, bias);
  Mat out = a.value();
  out.rowwise() += bias.value().row(0);
  const std::size_t ia = a.id(), ib = bias.id();
  return a.tape()->push(std::move(out), {a, bias}, [ia, ib](Tape& t, std::size_t self) {
    const Mat& g = t.grad(self);
    t.accumulate(ia, g);
    if (t.needs_grad(ib)) t.accumulate(ib, g.colwise().sum());
  });
}

Var tanh(const Var& a) {
  Mat out = tanh_fast(a.value());
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Mat& y = t.value(self);
    t.accumulate(ia, (t.grad(self).array() * (1.0 - y.array().square())).matrix());
  });
}

Var transpose(const Var& a) {
  const std::size_t ia = a.id();
  return a.tape()->push(a.value().transpose(), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).transpose());
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw DimensionError("slice_rows: out of range");
  }
  const std::size_t ia = a.id();
  return a.tape()->push(a.value().middleRows(start, count), {a},
                        [ia, start](Tape& t, std::size_t self) {
                          t.accumulate_block(ia, start, 0, t.grad(self));
                        });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw DimensionError("slice_cols: out of range");
  }
  const std::size_t ia = a.id();
  return a.tape()->push(a.value().middleCols(start, count), {a},
                        [ia, start](Tape& t, std::size_t self) {
                          t.accumulate_block(ia, 0, start, t.grad(self));
                        });
}

Var gather_rows(const Var& a, std::span<const Eigen::Index> rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= a.rows()) throw DimensionError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(r)) = a.value().row(rows[r]);
  }
  const std::size_t ia = a.id();
  const Eigen::Index src_rows = a.rows(), cols = a.cols();
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  return a.tape()->push(std::move(out), {a},
                        [ia, src_rows, cols, idx = std::move(idx)](Tape& t, std::size_t self) {
                          const Mat& g = t.grad(self);
                          Mat acc = Mat::Zero(src_rows, cols);
                          for (std::size_t r = 0; r < idx.size(); ++r) {
                            acc.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
                          }
                          t.accumulate(ia, acc);
                        });
}

Var vstack(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("vstack: no parts");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  for (const Var& p : parts) {
    require(p.cols() == cols, "vstack", parts.front(), p);
    rows += p.rows();
  }
  Mat out(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> layout;
  layout.reserve(parts.size());
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    layout.emplace_back(p.id(), p.rows());
    at += p.rows();
  }
  return parts.front().tape()->push(std::move(out), parts,
                                    [layout = std::move(layout)](Tape& t, std::size_t self) {
                                      const Mat& g = t.grad(self);
                                      Eigen::Index at = 0;
                                      for (const auto& [id, n] : layout) {
                                        if (t.needs_grad(id)) t.accumulate(id, g.middleRows(at, n));
                                        at += n;
                                      }
                                    });
}

Var hstack(const Var& a, const Var& b) {
  require(a.rows() == b.rows(), "hstack", a, b);
  Mat out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const std::size_t ia = a.id(), ib = b.id();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  return a.tape()->push(std::move(out), {a, b}, [ia, ib, ca, cb](Tape& t, std::size_t self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate(ia, g.leftCols(ca));
    if (t.needs_grad(ib)) t.accumulate(ib, g.rightCols(cb));
  });
}

Var softmax_rows(const Var& a) {
  Mat out(a.rows(), a.cols());
  std::vector<bool> active(static_cast<std::size_t>(a.cols()), true);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    out.row(r) = softmax_masked(a.value().row(r).transpose(), active).transpose();
  }
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Mat& y = t.value(self);
    const Mat& g = t.grad(self);
    Mat dx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      dx.row(r) = (y.row(r).array() * (g.row(r).array() - dot)).matrix();
    }
    t.accumulate(ia, dx);
  });
}

Var solve_spd(const Var& M, const Var& B) {
  require(M.rows() == M.cols() && M.rows() == B.rows(), "solve_spd", M, B);
  auto llt = std::make_shared<Eigen::LLT<Mat>>(M.value());
  if (llt->info() != Eigen::Success) throw SingularityError("solve_spd: matrix not positive definite");
  Mat y = llt->solve(B.value());
  if (!all_finite(y)) throw SingularityError("solve_spd: non-finite solution");
  const std::size_t im = M.id(), ib = B.id();
  return M.tape()->push(std::move(y), {M, B}, [im, ib, llt](Tape& t, std::size_t self) {
    Mat gb = llt->solve(t.grad(self));
    if (t.needs_grad(im)) t.accumulate(im, -gb * t.value(self).transpose());
    if (t.needs_grad(ib)) t.accumulate(ib, gb);
  });
}

Var add_diagonal(const Var& a, double lambda) {
  if (a.rows() != a.cols()) throw DimensionError("add_diagonal: matrix not square");
  Mat out = a.value();
  out.diagonal().array() += lambda;
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
  });
}

Var ridge(const Var& A, const Var& B, double lambda) {
  Mat K = ridge_solve(A.value(), B.value(), lambda);
  const std::size_t ia = A.id(), ib = B.id();
  return A.tape()->push(std::move(K), {A, B}, [ia, ib, lambda](Tape& t, std::size_t self) {
    const Mat& a = t.value(ia);
    const Mat& b = t.value(ib);
    const Mat& k = t.value(self);
    const Mat& g = t.grad(self);
    // H = (A^T A + lambda I)^{-1} G, via the Woodbury identity when the
    // forward pass used the dual form.
    Mat h;
    if (lambda > 0.0 && a.rows() < a.cols()) {
      Mat gram = a * a.transpose();
      gram.diagonal().array() += lambda;
      Eigen::LLT<Mat> llt(gram);
      h = (g - a.transpose() * llt.solve(a * g)) / lambda;
    } else {
      Mat normal = a.transpose() * a;
      normal.diagonal().array() += lambda;
      h = Eigen::LLT<Mat>(normal).solve(g);
    }
    if (t.needs_grad(ib)) t.accumulate(ib, a * h);
    if (t.needs_grad(ia)) {
      t.accumulate(ia, b * h.transpose() - a * (k * h.transpose() + h * k.transpose()));
    }
  });
}

Var sum_squares(const Var& a) {
  Mat out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  const std::size_t ia = a.id();
  return a.tape()->push(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.value(ia) * (2.0 * t.grad(self)(0, 0)));
  });
}

Var masked_sq_error(const Var& pred, const Mat& target, const BoolMat& mask, double scale) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() || mask.rows() != target.rows() ||
      mask.cols() != target.cols()) {
    throw DimensionError("masked_sq_error: shape mismatch");
  }
  Mat diff = (pred.value() - target).cwiseProduct(mask.cast<double>());
  Mat out(1, 1);
  out(0, 0) = scale * diff.squaredNorm();
  const std::size_t ip = pred.id();
  return pred.tape()->push(std::move(out), {pred},
                           [ip, diff = std::move(diff), scale](Tape& t, std::size_t self) {
                             t.accumulate(ip, diff * (2.0 * scale * t.grad(self)(0, 0)));
                           });
}

Var add_scalars(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("add_scalars: no parts");
  Mat out = Mat::Zero(1, 1);
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    out(0, 0) += p.scalar();
    ids.push_back(p.id());
  }
  return parts.front().tape()->push(std::move(out), parts,
                                    [ids = std::move(ids)](Tape& t, std::size_t self) {
                                      for (std::size_t id : ids) t.accumulate(id, t.grad(self));
                                    });
}

Var affine(const Var& x, const Var& W, const Var& b) { return add_bias(matmul(x, W), b); }

Var affine_tanh(const Var& x, const Var& W, const Var& b) { return tanh(affine(x, W, b)); }

}  // namespace ad

double grad_check(const std::function<ad::Var(ad::Tape&)>& f, std::span<ParamTensor* const> params,
                  double epsilon) {
  for (ParamTensor* p : params) p->zero_grad();
  {
    ad::Tape tape;
    ad::Var loss = f(tape);
    tape.backward(loss);
  }
  auto eval = [&f]() {
    ad::Tape tape;
    return f(tape).scalar();
  };
  double worst = 0.0;
  for (ParamTensor* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + epsilon;
      const double up = eval();
      x = saved - epsilon;
      const double down = eval();
      x = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = p->grad.data()[i];
      const double denom = std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace craft
