#include "mapid/netcore.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mapid/errors.hpp"
#include "mapid/rng.hpp"

namespace mapid {

namespace {

constexpr double kSigClamp = 1e-12;
constexpr double kHalfSmoothing = 1e-8;

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EMat> view(const Mat& m) {
  return {m.data.data(), m.rows, m.cols};
}
Eigen::Map<EMat> view(Mat& m) {
  return {m.data.data(), m.rows, m.cols};
}

template <class Params, class F>
void for_each_mat(Params& params, F&& f) {
  for (auto& stack : params.stacks) {
    for (auto& layer : stack.layers) {
      f(layer.w_lin);
      f(layer.e_sig);
      for (auto& w : layer.w_op) f(w);
    }
    f(stack.w_out);
  }
}

void check_shapes(const NetworkConfig& cfg, const NetworkParams& params) {
  if (static_cast<int>(params.stacks.size()) != cfg.stacks)
    throw std::invalid_argument("parameter stack count does not match config");
}

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double half_penalty_grad(double w) {
  return sgn(w) / (2.0 * std::sqrt(std::fabs(w) + kHalfSmoothing));
}

double nearest_snap(double e) {
  double z = std::round(e);
  if (z < 0.0) z = 0.0;
  if (z > 3.0) z = 3.0;
  return z;
}

}  // namespace

NetworkParams make_params(const NetworkConfig& cfg) {
  NetworkParams p;
  p.stacks.resize(static_cast<std::size_t>(cfg.stacks));
  const int n_ops = static_cast<int>(cfg.operators.size());
  for (auto& stack : p.stacks) {
    stack.layers.resize(static_cast<std::size_t>(cfg.layers));
    for (int l = 0; l < cfg.layers; ++l) {
      const int d_in = cfg.layer_input_dim(l);
      LayerParams& layer = stack.layers[static_cast<std::size_t>(l)];
      layer.w_lin = Mat(cfg.h_lin, d_in);
      layer.e_sig = Mat(cfg.h_sig, d_in);
      layer.w_op.assign(static_cast<std::size_t>(n_ops), Mat(cfg.h_op, cfg.h_sig));
    }
    stack.w_out = Mat(cfg.n, cfg.layer_output_dim());
  }
  return p;
}

std::size_t param_count(const NetworkConfig& cfg) {
  std::size_t count = 0;
  NetworkParams p = make_params(cfg);
  for_each_mat(p, [&](const Mat& m) { count += m.size(); });
  return count;
}

NetworkParams init_params(const NetworkConfig& cfg, std::uint64_t seed) {
  NetworkParams p = make_params(cfg);
  Rng rng(seed);
  for (auto& stack : p.stacks) {
    for (auto& layer : stack.layers) {
      for (double& w : layer.w_lin.data) w = rng.normal(0.0, cfg.weight_init_std);
      for (double& e : layer.e_sig.data) e = rng.normal(1.0, cfg.exp_init_std);
      for (auto& wop : layer.w_op)
        for (double& w : wop.data) w = rng.normal(0.0, cfg.weight_init_std);
    }
    for (double& w : stack.w_out.data) w = rng.normal(0.0, cfg.weight_init_std);
  }
  return p;
}

std::vector<double> flatten(const NetworkParams& params) {
  std::vector<double> flat;
  for_each_mat(params, [&](const Mat& m) {
    flat.insert(flat.end(), m.data.begin(), m.data.end());
  });
  return flat;
}

void unflatten(const std::vector<double>& flat, NetworkParams& params) {
  std::size_t pos = 0;
  for_each_mat(params, [&](Mat& m) {
    if (pos + m.size() > flat.size())
      throw std::invalid_argument("flat parameter vector too short");
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
              flat.begin() + static_cast<std::ptrdiff_t>(pos + m.size()),
              m.data.begin());
    pos += m.size();
  });
  if (pos != flat.size())
    throw std::invalid_argument("flat parameter vector size mismatch");
}

namespace {

struct LayerTape {
  EMat u;    // layer input, d_in x M
  EMat ln_a; // log of clamped |u|
  EMat s;    // signomial outputs, h_sig x M
  std::vector<EMat> z;  // per-operator pre-activations, h_op x M
};

struct StackTape {
  std::vector<LayerTape> layers;
  EMat u_final;
};

EMat apply_op(UnaryOp op, const EMat& z) {
  switch (op) {
    case UnaryOp::Sin: return z.array().sin().matrix();
    case UnaryOp::Abs: return z.array().abs().matrix();
    case UnaryOp::Exp: return z.array().exp().matrix();
    case UnaryOp::Sign: return z.array().sign().matrix();
  }
  return z;
}

EMat op_derivative(UnaryOp op, const EMat& z) {
  switch (op) {
    case UnaryOp::Sin: return z.array().cos().matrix();
    case UnaryOp::Abs: return z.array().sign().matrix();
    case UnaryOp::Exp: return z.array().exp().matrix();
    case UnaryOp::Sign: return EMat::Zero(z.rows(), z.cols());
  }
  return z;
}

// Shared forward pass; fills tapes only when requested (gradient path).
EMat run_forward(const NetworkConfig& cfg, const NetworkParams& params,
                 const EMat& u0, std::vector<StackTape>* tapes) {
  const auto M = u0.cols();
  const int n_ops = static_cast<int>(cfg.operators.size());
  EMat pred = EMat::Zero(cfg.n, M);
  if (tapes) tapes->resize(params.stacks.size());

  for (std::size_t k = 0; k < params.stacks.size(); ++k) {
    const StackParams& stack = params.stacks[k];
    EMat u = u0;
    StackTape* tape = tapes ? &(*tapes)[k] : nullptr;
    if (tape) tape->layers.resize(stack.layers.size());

    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
      const LayerParams& layer = stack.layers[l];
      const EMat lin = view(layer.w_lin) * u;
      const EMat ln_a = u.array().abs().max(kSigClamp).log().matrix();
      const EMat s = (view(layer.e_sig) * ln_a).array().exp().matrix();

      EMat next(cfg.layer_output_dim(), M);
      next.topRows(cfg.h_lin) = lin;
      next.middleRows(cfg.h_lin, cfg.h_sig) = s;
      std::vector<EMat> zs;
      if (tape) zs.reserve(static_cast<std::size_t>(n_ops));
      for (int t = 0; t < n_ops; ++t) {
        EMat z = view(layer.w_op[static_cast<std::size_t>(t)]) * s;
        next.middleRows(cfg.h_lin + cfg.h_sig + t * cfg.h_op, cfg.h_op) =
            apply_op(cfg.operators[static_cast<std::size_t>(t)], z);
        if (tape) zs.push_back(std::move(z));
      }
      next.bottomRows(1).setConstant(cfg.bias_value);

      if (!next.allFinite())
        throw NumericOverflow(static_cast<int>(k), static_cast<int>(l));

      if (tape) {
        LayerTape& lt = tape->layers[l];
        lt.u = std::move(u);
        lt.ln_a = ln_a;
        lt.s = s;
        lt.z = std::move(zs);
      }
      u = std::move(next);
    }
    if (tape) tape->u_final = u;
    pred.noalias() += view(stack.w_out) * u;
  }
  if (!pred.allFinite())
    throw NumericOverflow(static_cast<int>(params.stacks.size()) - 1, cfg.layers);
  return pred;
}

EMat to_columns(const std::vector<StateVec>& rows, int expect_dim) {
  if (rows.empty()) throw std::invalid_argument("empty batch");
  EMat m(expect_dim, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<int>(rows[i].size()) != expect_dim)
      throw std::invalid_argument("sample dimension mismatch");
    for (int j = 0; j < expect_dim; ++j)
      m(j, static_cast<Eigen::Index>(i)) = rows[i][static_cast<std::size_t>(j)];
  }
  return m;
}

EMat input_block(const NetworkConfig& cfg, const std::vector<StateVec>& inputs) {
  const EMat x = to_columns(inputs, cfg.n);
  EMat u0(cfg.n + 1, x.cols());
  u0.topRows(cfg.n) = x;
  u0.bottomRows(1).setConstant(cfg.bias_value);
  return u0;
}

}  // namespace

std::vector<StateVec> forward_batch(const NetworkConfig& cfg,
                                    const NetworkParams& params,
                                    const std::vector<StateVec>& inputs) {
  check_shapes(cfg, params);
  const EMat pred = run_forward(cfg, params, input_block(cfg, inputs), nullptr);
  std::vector<StateVec> out(inputs.size(), StateVec(static_cast<std::size_t>(cfg.n)));
  for (std::size_t i = 0; i < out.size(); ++i)
    for (int j = 0; j < cfg.n; ++j)
      out[i][static_cast<std::size_t>(j)] = pred(j, static_cast<Eigen::Index>(i));
  return out;
}

StateVec forward(const NetworkConfig& cfg, const NetworkParams& params,
                 const StateVec& x) {
  return forward_batch(cfg, params, {x})[0];
}

double mean_absolute_error(const NetworkConfig& cfg, const NetworkParams& params,
                           const std::vector<StateVec>& inputs,
                           const std::vector<StateVec>& targets) {
  if (inputs.size() != targets.size())
    throw std::invalid_argument("inputs/targets size mismatch");
  const EMat pred = run_forward(cfg, params, input_block(cfg, inputs), nullptr);
  const EMat y = to_columns(targets, cfg.n);
  return (pred - y).array().abs().sum() / static_cast<double>(inputs.size());
}

Regularizers regularizers(const NetworkConfig& cfg, const NetworkParams& params) {
  check_shapes(cfg, params);
  Regularizers reg;
  for (const auto& stack : params.stacks) {
    for (const auto& layer : stack.layers) {
      for (double w : layer.w_lin.data) reg.l_half += std::sqrt(std::fabs(w));
      for (double e : layer.e_sig.data) {
        const double d = std::fabs(e - nearest_snap(e));
        reg.l_poly += cfg.poly_sqrt ? std::sqrt(d) : d;
      }
      for (const auto& wop : layer.w_op)
        for (double w : wop.data) reg.l_ops += std::sqrt(std::fabs(w));
    }
    for (double w : stack.w_out.data) reg.l_half += std::sqrt(std::fabs(w));
  }
  return reg;
}

namespace {

// Move w toward `target` by at most `step`, landing exactly on it when the
// move would cross (half-thresholding behavior).
void shrink_toward(double& w, double target, double step) {
  if (std::fabs(w - target) <= step)
    w = target;
  else
    w -= step * sgn(w - target);
}

}  // namespace

void penalty_step(const NetworkConfig& cfg, NetworkParams& params,
                  const Alphas& alphas, double lr) {
  check_shapes(cfg, params);
  for (auto& stack : params.stacks) {
    for (auto& layer : stack.layers) {
      for (double& w : layer.w_lin.data)
        shrink_toward(w, 0.0, lr * alphas.a1 * std::fabs(half_penalty_grad(w)));
      for (double& e : layer.e_sig.data) {
        const double step =
            cfg.poly_sqrt
                ? lr * alphas.a2 * std::fabs(half_penalty_grad(e - nearest_snap(e)))
                : lr * alphas.a2;
        shrink_toward(e, nearest_snap(e), step);
      }
      for (auto& wop : layer.w_op)
        for (double& w : wop.data)
          shrink_toward(w, 0.0, lr * alphas.a3 * std::fabs(half_penalty_grad(w)));
    }
    for (double& w : stack.w_out.data)
      shrink_toward(w, 0.0, lr * alphas.a1 * std::fabs(half_penalty_grad(w)));
  }
}

LossBreakdown loss_and_gradient(const NetworkConfig& cfg, const NetworkParams& params,
                                const std::vector<StateVec>& inputs,
                                const std::vector<StateVec>& targets,
                                const Alphas& alphas, NetworkParams& grad) {
  check_shapes(cfg, params);
  if (inputs.size() != targets.size() || inputs.empty())
    throw std::invalid_argument("bad batch");
  const double M = static_cast<double>(inputs.size());
  const int n_ops = static_cast<int>(cfg.operators.size());

  std::vector<StackTape> tapes;
  const EMat u0 = input_block(cfg, inputs);
  const EMat pred = run_forward(cfg, params, u0, &tapes);
  const EMat y = to_columns(targets, cfg.n);
  const EMat resid = pred - y;

  for_each_mat(grad, [](Mat& m) { std::fill(m.data.begin(), m.data.end(), 0.0); });

  // dMAE/dpred, full batch.
  const EMat g_pred = (resid.array().sign() / M).matrix();

  for (std::size_t k = 0; k < params.stacks.size(); ++k) {
    const StackParams& stack = params.stacks[k];
    StackParams& gstack = grad.stacks[k];
    const StackTape& tape = tapes[k];

    view(gstack.w_out).noalias() += g_pred * tape.u_final.transpose();
    EMat g_u = view(stack.w_out).transpose() * g_pred;

    for (int l = cfg.layers - 1; l >= 0; --l) {
      const LayerParams& layer = stack.layers[static_cast<std::size_t>(l)];
      LayerParams& glayer = gstack.layers[static_cast<std::size_t>(l)];
      const LayerTape& lt = tape.layers[static_cast<std::size_t>(l)];
      const auto d_in = lt.u.rows();

      const auto g_lin = g_u.topRows(cfg.h_lin);
      EMat g_s = g_u.middleRows(cfg.h_lin, cfg.h_sig);
      EMat g_prev = EMat::Zero(d_in, lt.u.cols());

      view(glayer.w_lin).noalias() += g_lin * lt.u.transpose();
      g_prev.noalias() += view(layer.w_lin).transpose() * g_lin;

      for (int t = 0; t < n_ops; ++t) {
        const auto g_o = g_u.middleRows(cfg.h_lin + cfg.h_sig + t * cfg.h_op, cfg.h_op);
        const EMat g_z =
            (g_o.array() *
             op_derivative(cfg.operators[static_cast<std::size_t>(t)], lt.z[static_cast<std::size_t>(t)]).array())
                .matrix();
        view(glayer.w_op[static_cast<std::size_t>(t)]).noalias() += g_z * lt.s.transpose();
        g_s.noalias() += view(layer.w_op[static_cast<std::size_t>(t)]).transpose() * g_z;
      }

      // Signomial backward: s = exp(E * ln_a), d ln|u|/du = 1/u outside the clamp.
      const EMat g_m = (g_s.array() * lt.s.array()).matrix();
      view(glayer.e_sig).noalias() += g_m * lt.ln_a.transpose();
      const EMat g_ln = view(layer.e_sig).transpose() * g_m;
      const EMat inv_u =
          (lt.u.array().abs() > kSigClamp).select(lt.u.array().inverse(), 0.0).matrix();
      g_prev.array() += g_ln.array() * inv_u.array();

      g_u = std::move(g_prev);
    }
  }

  // Penalty values on exact |w|^(1/2); gradients use the smoothed subgradient.
  const Regularizers reg = regularizers(cfg, params);
  for (std::size_t k = 0; k < params.stacks.size(); ++k) {
    const StackParams& stack = params.stacks[k];
    StackParams& gstack = grad.stacks[k];
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
      const LayerParams& layer = stack.layers[l];
      LayerParams& glayer = gstack.layers[l];
      for (std::size_t i = 0; i < layer.w_lin.size(); ++i)
        glayer.w_lin.data[i] += alphas.a1 * half_penalty_grad(layer.w_lin.data[i]);
      for (std::size_t i = 0; i < layer.e_sig.size(); ++i) {
        const double d = layer.e_sig.data[i] - nearest_snap(layer.e_sig.data[i]);
        glayer.e_sig.data[i] += alphas.a2 * (cfg.poly_sqrt ? half_penalty_grad(d) : sgn(d));
      }
      for (std::size_t t = 0; t < layer.w_op.size(); ++t)
        for (std::size_t i = 0; i < layer.w_op[t].size(); ++i)
          glayer.w_op[t].data[i] += alphas.a3 * half_penalty_grad(layer.w_op[t].data[i]);
    }
    for (std::size_t i = 0; i < stack.w_out.size(); ++i)
      gstack.w_out.data[i] += alphas.a1 * half_penalty_grad(stack.w_out.data[i]);
  }

  LossBreakdown loss;
  loss.mae = resid.array().abs().sum() / M;
  loss.l_half = reg.l_half;
  loss.l_poly = reg.l_poly;
  loss.l_ops = reg.l_ops;
  loss.total = loss.mae + alphas.a1 * reg.l_half + alphas.a2 * reg.l_poly +
               alphas.a3 * reg.l_ops;
  return loss;
}

namespace {

Expr linear_combo(const Mat& w, int row, const std::vector<Expr>& units) {
  std::vector<Expr> terms;
  for (int i = 0; i < w.cols; ++i) {
    const double c = w.at(row, i);
    if (c == 0.0) continue;
    terms.push_back(Expr::prod({Expr::constant(c), units[static_cast<std::size_t>(i)]}));
  }
  if (terms.empty()) return Expr::constant(0.0);
  if (terms.size() == 1) return terms[0];
  return Expr::sum(std::move(terms));
}

}  // namespace

ExprSystem extract(const NetworkConfig& cfg, const NetworkParams& params) {
  check_shapes(cfg, params);
  const int n_ops = static_cast<int>(cfg.operators.size());
  std::vector<Expr> outputs(static_cast<std::size_t>(cfg.n), Expr::constant(0.0));

  for (const StackParams& stack : params.stacks) {
    std::vector<Expr> u;
    for (int i = 0; i < cfg.n; ++i) u.push_back(Expr::var(i));
    u.push_back(Expr::constant(cfg.bias_value));

    for (const LayerParams& layer : stack.layers) {
      std::vector<Expr> next;
      for (int j = 0; j < cfg.h_lin; ++j) next.push_back(linear_combo(layer.w_lin, j, u));

      std::vector<Expr> sig;
      for (int j = 0; j < cfg.h_sig; ++j) {
        std::vector<Expr> factors;
        for (int i = 0; i < layer.e_sig.cols; ++i) {
          const double e = layer.e_sig.at(j, i);
          if (e == 0.0) continue;
          factors.push_back(Expr::signomial(u[static_cast<std::size_t>(i)], e));
        }
        if (factors.empty())
          sig.push_back(Expr::constant(1.0));
        else if (factors.size() == 1)
          sig.push_back(factors[0]);
        else
          sig.push_back(Expr::prod(std::move(factors)));
      }

      std::vector<Expr> ops;
      for (int t = 0; t < n_ops; ++t)
        for (int j = 0; j < cfg.h_op; ++j)
          ops.push_back(Expr::unary(
              cfg.operators[static_cast<std::size_t>(t)],
              linear_combo(layer.w_op[static_cast<std::size_t>(t)], j, sig)));

      next.insert(next.end(), sig.begin(), sig.end());
      next.insert(next.end(), ops.begin(), ops.end());
      next.push_back(Expr::constant(cfg.bias_value));
      u = std::move(next);
    }

    for (int d = 0; d < cfg.n; ++d)
      outputs[static_cast<std::size_t>(d)] = Expr::sum(
          {outputs[static_cast<std::size_t>(d)], linear_combo(stack.w_out, d, u)});
  }
  return canonicalize(outputs);
}

}  // namespace mapid
