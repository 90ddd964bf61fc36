#include "mdpt/numcore/tape.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace mdpt::numcore {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using CStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

constexpr double kMaskedScore = -1e30;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double gelu_fwd(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }
double gelu_bwd(double x) {
  double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  double pdf = std::exp(-0.5 * x * x) * kInvSqrt2Pi;
  return cdf + x * pdf;
}

}  // namespace

const Tape::Node& Tape::at(Value v) const {
  if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size())
    throw std::invalid_argument("Tape: invalid value handle");
  return nodes_[static_cast<size_t>(v.id)];
}

void Tape::check_alive() const {
  if (released_) throw std::runtime_error("Tape: graph already released by backprop");
}

Value Tape::push(Node n, const char* what) {
  check_alive();
  if (!n.out.all_finite())
    throw std::runtime_error(std::string("Tape: non-finite value produced by ") + what);
  nodes_.push_back(std::move(n));
  return Value{static_cast<int32_t>(nodes_.size() - 1)};
}

Value Tape::param(const std::string& name, const Tensor& t) {
  check_alive();
  auto it = param_index_.find(name);
  if (it != param_index_.end()) return Value{it->second};
  Node n;
  n.op = Op::kParam;
  n.out = t;  // copy keeps forward values stable if the owner mutates mid-step
  n.pname = name;
  Value v = push(std::move(n), "param");
  param_index_.emplace(name, v.id);
  return v;
}

Value Tape::input(Tensor t) {
  Node n;
  n.op = Op::kInput;
  n.out = std::move(t);
  return push(std::move(n), "input");
}

const Tensor& Tape::value(Value v) const {
  check_alive();
  return at(v).out;
}

Value Tape::matmul(Value a, Value b) {
  const Tensor& A = at(a).out;
  const Tensor& B = at(b).out;
  if (A.cols() != B.rows())
    throw std::invalid_argument("matmul: inner dims " + shape_str(A.shape()) + " x " +
                                shape_str(B.shape()));
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.out = Tensor({A.rows(), B.cols()});
  MapRM(n.out.data(), A.rows(), B.cols()).noalias() =
      CMapRM(A.data(), A.rows(), A.cols()) * CMapRM(B.data(), B.rows(), B.cols());
  return push(std::move(n), "matmul");
}

Value Tape::add(Value a, Value b) {
  const Tensor& A = at(a).out;
  const Tensor& B = at(b).out;
  if (!A.same_shape(B)) throw std::invalid_argument("add: shape mismatch");
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.out = A;
  for (size_t i = 0; i < n.out.size(); ++i) n.out[i] += B[i];
  return push(std::move(n), "add");
}

Value Tape::sub(Value a, Value b) {
  const Tensor& A = at(a).out;
  const Tensor& B = at(b).out;
  if (!A.same_shape(B)) throw std::invalid_argument("sub: shape mismatch");
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.out = A;
  for (size_t i = 0; i < n.out.size(); ++i) n.out[i] -= B[i];
  return push(std::move(n), "sub");
}

Value Tape::add_bias(Value x, Value b) {
  const Tensor& X = at(x).out;
  const Tensor& B = at(b).out;
  if (B.size() != X.cols()) throw std::invalid_argument("add_bias: bias length mismatch");
  Node n;
  n.op = Op::kAddBias;
  n.a = x.id;
  n.b = b.id;
  n.out = X;
  size_t r = X.rows(), c = X.cols();
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) n.out[i * c + j] += B[j];
  return push(std::move(n), "add_bias");
}

Value Tape::scale(Value x, double c) {
  const Tensor& X = at(x).out;
  Node n;
  n.op = Op::kScale;
  n.a = x.id;
  n.alpha = c;
  n.out = X;
  for (double& v : n.out.values()) v *= c;
  return push(std::move(n), "scale");
}

Value Tape::mul(Value a, Value b) {
  const Tensor& A = at(a).out;
  const Tensor& B = at(b).out;
  if (!A.same_shape(B)) throw std::invalid_argument("mul: shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.a = a.id;
  n.b = b.id;
  n.out = A;
  for (size_t i = 0; i < n.out.size(); ++i) n.out[i] *= B[i];
  return push(std::move(n), "mul");
}

Value Tape::square(Value x) {
  const Tensor& X = at(x).out;
  Node n;
  n.op = Op::kSquare;
  n.a = x.id;
  n.out = X;
  for (double& v : n.out.values()) v *= v;
  return push(std::move(n), "square");
}

Value Tape::sum_all(Value x) {
  const Tensor& X = at(x).out;
  double s = 0.0;
  for (double v : X.values()) s += v;
  Node n;
  n.op = Op::kSumAll;
  n.a = x.id;
  n.out = Tensor::scalar(s);
  return push(std::move(n), "sum_all");
}

Value Tape::gelu(Value x) {
  const Tensor& X = at(x).out;
  Node n;
  n.op = Op::kGelu;
  n.a = x.id;
  n.out = X;
  for (double& v : n.out.values()) v = gelu_fwd(v);
  return push(std::move(n), "gelu");
}

Value Tape::layer_norm(Value x, Value gain, Value bias, double eps) {
  const Tensor& X = at(x).out;
  const Tensor& G = at(gain).out;
  const Tensor& B = at(bias).out;
  size_t r = X.rows(), c = X.cols();
  if (G.size() != c || B.size() != c)
    throw std::invalid_argument("layer_norm: gain/bias length mismatch");
  Node n;
  n.op = Op::kLayerNorm;
  n.a = x.id;
  n.b = gain.id;
  n.c = bias.id;
  n.alpha = eps;
  n.out = Tensor({r, c});
  n.saved = Tensor({r, c});  // normalized rows
  n.saved2 = Tensor({r});    // 1/sigma per row
  for (size_t i = 0; i < r; ++i) {
    const double* xi = X.data() + i * c;
    double mean = 0.0;
    for (size_t j = 0; j < c; ++j) mean += xi[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (size_t j = 0; j < c; ++j) {
      double d = xi[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    double inv = 1.0 / std::sqrt(var + eps);
    n.saved2[i] = inv;
    for (size_t j = 0; j < c; ++j) {
      double xh = (xi[j] - mean) * inv;
      n.saved[i * c + j] = xh;
      n.out[i * c + j] = G[j] * xh + B[j];
    }
  }
  return push(std::move(n), "layer_norm");
}

Value Tape::gather_rows(Value table, std::vector<int32_t> ids) {
  const Tensor& T = at(table).out;
  size_t rows = T.rows(), c = T.cols();
  Node n;
  n.op = Op::kGatherRows;
  n.a = table.id;
  n.out = Tensor({ids.size(), c});
  for (size_t i = 0; i < ids.size(); ++i) {
    int32_t id = ids[i];
    if (id < 0 || static_cast<size_t>(id) >= rows)
      throw std::invalid_argument("gather_rows: id " + std::to_string(id) +
                                  " out of range [0," + std::to_string(rows) + ")");
    const double* src = T.data() + static_cast<size_t>(id) * c;
    std::copy(src, src + c, n.out.data() + i * c);
  }
  n.ids = std::move(ids);
  return push(std::move(n), "gather_rows");
}

Value Tape::attention(Value q, Value k, Value v, const AttentionShape& shape,
                      std::vector<uint8_t> key_valid) {
  const Tensor& Q = at(q).out;
  const Tensor& K = at(k).out;
  const Tensor& V = at(v).out;
  const size_t B = shape.batch, S = shape.seq, H = Q.cols();
  if (!Q.same_shape(K) || !Q.same_shape(V) || Q.rows() != B * S)
    throw std::invalid_argument("attention: q/k/v must be (batch*seq, hidden)");
  if (shape.heads == 0 || H % shape.heads != 0)
    throw std::invalid_argument("attention: hidden not divisible by heads");
  if (key_valid.size() != B * S) throw std::invalid_argument("attention: bad key mask size");
  const size_t hd = H / shape.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

  Node n;
  n.op = Op::kAttention;
  n.a = q.id;
  n.b = k.id;
  n.c = v.id;
  n.att = shape;
  n.out = Tensor({B * S, H});
  n.saved = Tensor({B * shape.heads * S, S});  // softmax probs per (batch, head)
  const auto stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(H));
  for (size_t b = 0; b < B; ++b) {
    for (size_t h = 0; h < shape.heads; ++h) {
      const size_t base = b * S * H + h * hd;
      CStridedMap Qm(Q.data() + base, S, hd, stride);
      CStridedMap Km(K.data() + base, S, hd, stride);
      CStridedMap Vm(V.data() + base, S, hd, stride);
      RowMat scores = (Qm * Km.transpose()) * inv_sqrt;
      for (size_t j = 0; j < S; ++j)
        if (!key_valid[b * S + j]) scores.col(static_cast<Eigen::Index>(j)).setConstant(kMaskedScore);
      MapRM P(n.saved.data() + (b * shape.heads + h) * S * S, S, S);
      for (size_t i = 0; i < S; ++i) {
        auto row = scores.row(static_cast<Eigen::Index>(i));
        double mx = row.maxCoeff();
        double sum = 0.0;
        for (size_t j = 0; j < S; ++j) {
          double e = std::exp(row(static_cast<Eigen::Index>(j)) - mx);
          P(i, j) = e;
          sum += e;
        }
        P.row(static_cast<Eigen::Index>(i)) /= sum;
      }
      StridedMap Om(n.out.data() + base, S, hd, stride);
      Om.noalias() = P * Vm;
    }
  }
  n.key_valid = std::move(key_valid);
  return push(std::move(n), "attention");
}

Value Tape::masked_cross_entropy(Value logits, std::vector<int32_t> targets,
                                 std::vector<size_t> rows) {
  const Tensor& L = at(logits).out;
  const size_t N = L.rows(), V = L.cols();
  if (rows.empty()) throw std::invalid_argument("masked_cross_entropy: empty target set");
  if (targets.size() != rows.size())
    throw std::invalid_argument("masked_cross_entropy: targets/rows length mismatch");
  const size_t nt = rows.size();
  Node n;
  n.op = Op::kMaskedCrossEntropy;
  n.a = logits.id;
  n.saved = Tensor({nt, V});  // softmax rows
  double total = 0.0;
  for (size_t j = 0; j < nt; ++j) {
    if (rows[j] >= N) throw std::invalid_argument("masked_cross_entropy: row out of range");
    int32_t t = targets[j];
    if (t < 0 || static_cast<size_t>(t) >= V)
      throw std::invalid_argument("masked_cross_entropy: target out of range");
    const double* l = L.data() + rows[j] * V;
    double mx = l[0];
    for (size_t c = 1; c < V; ++c) mx = std::max(mx, l[c]);
    double sum = 0.0;
    for (size_t c = 0; c < V; ++c) sum += std::exp(l[c] - mx);
    double lse = mx + std::log(sum);
    total += lse - l[static_cast<size_t>(t)];
    double* p = n.saved.data() + j * V;
    for (size_t c = 0; c < V; ++c) p[c] = std::exp(l[c] - lse);
  }
  n.out = Tensor::scalar(total / static_cast<double>(nt));
  n.ids = std::move(targets);
  n.rows = std::move(rows);
  return push(std::move(n), "masked_cross_entropy");
}

Tensor& Tape::grad_for(std::vector<Tensor>& grads, const Node&, int32_t id,
                       const std::vector<Node>& nodes) {
  Tensor& g = grads[static_cast<size_t>(id)];
  if (g.size() == 0) g = Tensor(nodes[static_cast<size_t>(id)].out.shape());
  return g;
}

void Tape::backward_node(int32_t i, std::vector<Tensor>& grads) {
  Node& n = nodes_[static_cast<size_t>(i)];
  const Tensor& g = grads[static_cast<size_t>(i)];
  switch (n.op) {
    case Op::kParam:
    case Op::kInput:
      break;
    case Op::kMatMul: {
      const Tensor& A = nodes_[n.a].out;
      const Tensor& B = nodes_[n.b].out;
      Tensor& dA = grad_for(grads, n, n.a, nodes_);
      Tensor& dB = grad_for(grads, n, n.b, nodes_);
      CMapRM G(g.data(), g.rows(), g.cols());
      MapRM(dA.data(), A.rows(), A.cols()).noalias() +=
          G * CMapRM(B.data(), B.rows(), B.cols()).transpose();
      MapRM(dB.data(), B.rows(), B.cols()).noalias() +=
          CMapRM(A.data(), A.rows(), A.cols()).transpose() * G;
      break;
    }
    case Op::kAdd: {
      Tensor& dA = grad_for(grads, n, n.a, nodes_);
      Tensor& dB = grad_for(grads, n, n.b, nodes_);
      for (size_t j = 0; j < g.size(); ++j) {
        dA[j] += g[j];
        dB[j] += g[j];
      }
      break;
    }
    case Op::kSub: {
      Tensor& dA = grad_for(grads, n, n.a, nodes_);
      Tensor& dB = grad_for(grads, n, n.b, nodes_);
      for (size_t j = 0; j < g.size(); ++j) {
        dA[j] += g[j];
        dB[j] -= g[j];
      }
      break;
    }
    case Op::kAddBias: {
      Tensor& dX = grad_for(grads, n, n.a, nodes_);
      Tensor& dB = grad_for(grads, n, n.b, nodes_);
      size_t r = g.rows(), c = g.cols();
      for (size_t j = 0; j < g.size(); ++j) dX[j] += g[j];
      for (size_t ri = 0; ri < r; ++ri)
        for (size_t ci = 0; ci < c; ++ci) dB[ci] += g[ri * c + ci];
      break;
    }
    case Op::kScale: {
      Tensor& dX = grad_for(grads, n, n.a, nodes_);
      for (size_t j = 0; j < g.size(); ++j) dX[j] += n.alpha * g[j];
      break;
    }
    case Op::kMul: {
      const Tensor& A = nodes_[n.a].out;
      const Tensor& B = nodes_[n.b].out;
      Tensor& dA = grad_for(grads, n, n.a, nodes_);
      Tensor& dB = grad_for(grads, n, n.b, nodes_);
      for (size_t j = 0; j < g.size(); ++j) {
        dA[j] += g[j] * B[j];
        dB[j] += g[j] * A[j];
      }
      break;
    }
    case Op::kSquare: {
      const Tensor& X = nodes_[n.a].out;
      Tensor& dX = grad_for(grads, n, n.a, nodes_);
      for (size_t j = 0; j < g.size(); ++j) dX[j] += 2.0 * X[j] * g[j];
      break;
    }
    case Op::kSumAll: {
      Tensor& dX = grad_for(grads, n, n.a, nodes_);
      double gv = g[0];
      for (size_t j = 0; j < dX.size(); ++j) dX[j] += gv;
      break;
    }
    case Op::kGelu: {
      const Tensor& X = nodes_[n.a].out;
      Tensor& dX = grad_for(grads, n, n.a, nodes_);
      for (size_t j = 0; j < g.size(); ++j) dX[j] += gelu_bwd(X[j]) * g[j];
      break;
    }
    case Op::kLayerNorm: {
      const Tensor& G = nodes_[n.b].out;
      Tensor& dX = grad_for(grads, n, n.a, nodes_);
      Tensor& dG = grad_for(grads, n, n.b, nodes_);
      Tensor& dBias = grad_for(grads, n, n.c, nodes_);
      size_t r = g.rows(), c = g.cols();
      double inv_c = 1.0 / static_cast<double>(c);
      for (size_t ri = 0; ri < r; ++ri) {
        const double* gy = g.data() + ri * c;
        const double* xh = n.saved.data() + ri * c;
        double inv_std = n.saved2[ri];
        double mean_dxh = 0.0, mean_dxh_xh = 0.0;
        for (size_t ci = 0; ci < c; ++ci) {
          double dxh = gy[ci] * G[ci];
          mean_dxh += dxh;
          mean_dxh_xh += dxh * xh[ci];
          dG[ci] += gy[ci] * xh[ci];
          dBias[ci] += gy[ci];
        }
        mean_dxh *= inv_c;
        mean_dxh_xh *= inv_c;
        double* dx = dX.data() + ri * c;
        for (size_t ci = 0; ci < c; ++ci) {
          double dxh = gy[ci] * G[ci];
          dx[ci] += inv_std * (dxh - mean_dxh - xh[ci] * mean_dxh_xh);
        }
      }
      break;
    }
    case Op::kGatherRows: {
      Tensor& dT = grad_for(grads, n, n.a, nodes_);
      size_t c = g.cols();
      for (size_t j = 0; j < n.ids.size(); ++j) {
        double* dst = dT.data() + static_cast<size_t>(n.ids[j]) * c;
        const double* src = g.data() + j * c;
        for (size_t ci = 0; ci < c; ++ci) dst[ci] += src[ci];
      }
      break;
    }
    case Op::kAttention: {
      const Tensor& Q = nodes_[n.a].out;
      const Tensor& K = nodes_[n.b].out;
      const Tensor& V = nodes_[n.c].out;
      Tensor& dQ = grad_for(grads, n, n.a, nodes_);
      Tensor& dK = grad_for(grads, n, n.b, nodes_);
      Tensor& dV = grad_for(grads, n, n.c, nodes_);
      const size_t B = n.att.batch, S = n.att.seq, H = Q.cols();
      const size_t hd = H / n.att.heads;
      const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
      const auto stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(H));
      for (size_t b = 0; b < B; ++b) {
        for (size_t h = 0; h < n.att.heads; ++h) {
          const size_t base = b * S * H + h * hd;
          CStridedMap Qm(Q.data() + base, S, hd, stride);
          CStridedMap Km(K.data() + base, S, hd, stride);
          CStridedMap Vm(V.data() + base, S, hd, stride);
          CStridedMap dOm(g.data() + base, S, hd, stride);
          CMapRM P(n.saved.data() + (b * n.att.heads + h) * S * S, S, S);
          StridedMap dQm(dQ.data() + base, S, hd, stride);
          StridedMap dKm(dK.data() + base, S, hd, stride);
          StridedMap dVm(dV.data() + base, S, hd, stride);
          dVm.noalias() += P.transpose() * dOm;
          RowMat dP = dOm * Vm.transpose();
          Eigen::VectorXd rowdot = (dP.array() * P.array()).rowwise().sum();
          RowMat dS = (dP.colwise() - rowdot).array() * P.array();
          dQm.noalias() += (dS * Km) * inv_sqrt;
          dKm.noalias() += (dS.transpose() * Qm) * inv_sqrt;
        }
      }
      break;
    }
    case Op::kMaskedCrossEntropy: {
      Tensor& dL = grad_for(grads, n, n.a, nodes_);
      size_t V = nodes_[n.a].out.cols();
      double gv = g[0] / static_cast<double>(n.rows.size());
      for (size_t j = 0; j < n.rows.size(); ++j) {
        double* dst = dL.data() + n.rows[j] * V;
        const double* p = n.saved.data() + j * V;
        for (size_t c = 0; c < V; ++c) dst[c] += gv * p[c];
        dst[static_cast<size_t>(n.ids[j])] -= gv;
      }
      break;
    }
  }
}

GradientMap Tape::backprop(Value loss) {
  check_alive();
  const Node& ln = at(loss);
  if (ln.out.size() != 1)
    throw std::invalid_argument("backprop: loss must be scalar, got shape " +
                                shape_str(ln.out.shape()));
  if (!ln.out.all_finite()) throw std::runtime_error("backprop: non-finite loss");

  std::vector<Tensor> grads(nodes_.size());
  grads[static_cast<size_t>(loss.id)] = Tensor::scalar(1.0);
  GradientMap result;
  for (int32_t i = loss.id; i >= 0; --i) {
    if (grads[static_cast<size_t>(i)].size() == 0) continue;  // not reachable from loss
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.op == Op::kParam) {
      result[n.pname] = std::move(grads[static_cast<size_t>(i)]);
      continue;
    }
    backward_node(i, grads);
    grads[static_cast<size_t>(i)] = Tensor();  // free as we go
  }
  for (const auto& [name, gt] : result)
    if (!gt.all_finite()) throw std::runtime_error("backprop: non-finite gradient for " + name);
  nodes_.clear();
  param_index_.clear();
  released_ = true;
  return result;
}

}  // namespace mdpt::numcore
