#include "attdmm/model/params.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "attdmm/numcore/errors.hpp"
#include "attdmm/numcore/random.hpp"

namespace attdmm {
namespace {

struct Shape {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

GatedNetParams<Shape> gated_shapes(int in, int hidden, int out) {
  return {{hidden, in}, {hidden, 1}, {out, hidden}, {out, 1}, {hidden, in}, {hidden, 1},
          {out, hidden}, {out, 1},   {out, in},     {out, 1}, {out, out},   {out, 1}};
}

Weights<Shape> expected_shapes(const Dims& d) {
  const int in = d.latent_dim + d.static_dim;
  Weights<Shape> s;
  s.transition = gated_shapes(in, d.transition_hidden, d.latent_dim);
  s.emission = gated_shapes(d.latent_dim, d.emission_hidden, d.feature_dim);
  s.attention = {{d.attention_dim, d.latent_dim}, {d.attention_dim, 1}, {d.attention_dim, 1}, {1, 1}};
  s.predictor = {{d.predictor_hidden, d.latent_dim}, {d.predictor_hidden, 1}, {1, d.predictor_hidden}, {1, 1}};
  s.posterior = {{d.rnn_dim, 2 * d.feature_dim}, {d.rnn_dim, d.rnn_dim}, {d.rnn_dim, 1},
                 {d.rnn_dim, in}, {d.rnn_dim, 1},
                 {d.latent_dim, d.rnn_dim}, {d.latent_dim, 1},
                 {d.latent_dim, d.rnn_dim}, {d.latent_dim, 1}};
  s.z0 = {d.latent_dim, 1};
  return s;
}

bool is_bias(std::string_view name) {
  return name.ends_with("_b") || name == "z0";
}

}  // namespace

void Dims::validate() const {
  const int all[] = {latent_dim,      static_dim, feature_dim,   transition_hidden,
                     emission_hidden, rnn_dim,    attention_dim, predictor_hidden};
  for (int v : all) {
    if (v <= 0) throw ContractViolation("Dims: every dimension must be a positive integer");
  }
}

ModelParams init_params(const Dims& dims, std::uint64_t seed, double var_floor, bool linear_mode) {
  dims.validate();
  require(var_floor > 0.0, "init_params: var_floor must be positive");
  ModelParams p;
  p.dims = dims;
  p.settings = {var_floor, linear_mode};
  Rng rng(seed);
  Weights<Shape>::visit(
      [&](std::string_view name, const Shape& shape, Tensor& t) {
        t = Tensor::Zero(shape.rows, shape.cols);
        if (name == "attention.temperature") {
          t(0, 0) = 1.0;
        } else if (name == "attention.query") {
          std::uniform_real_distribution<double> u(-1.0, 1.0);
          while (t.isZero(0.0)) {
            for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = u(rng);
          }
        } else if (!is_bias(name)) {
          const double bound = 1.0 / std::sqrt(static_cast<double>(shape.cols));
          std::uniform_real_distribution<double> u(-bound, bound);
          for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = u(rng);
        }
      },
      expected_shapes(dims), p.weights);
  return p;
}

Weights<Tensor> zeros_like(const Weights<Tensor>& w) {
  Weights<Tensor> out;
  Weights<Tensor>::visit([](std::string_view, const Tensor& src, Tensor& dst) {
    dst = Tensor::Zero(src.rows(), src.cols());
  }, w, out);
  return out;
}

void check_shapes(const Weights<Tensor>& w, const Dims& dims) {
  Weights<Shape>::visit(
      [](std::string_view name, const Shape& shape, const Tensor& t) {
        if (t.rows() != shape.rows || t.cols() != shape.cols) {
          std::ostringstream os;
          os << "shape mismatch for " << name << ": expected " << shape.rows << "x" << shape.cols
             << ", got " << t.rows() << "x" << t.cols();
          throw DataError(os.str());
        }
      },
      expected_shapes(dims), w);
}

std::size_t parameter_count(const Weights<Tensor>& w) {
  std::size_t n = 0;
  Weights<Tensor>::visit([&n](std::string_view, const Tensor& t) { n += t.size(); }, w);
  return n;
}

Weights<ad::Var> bind(ad::Tape& tape, const Weights<Tensor>& w) {
  Weights<ad::Var> out;
  Weights<Tensor>::visit([&tape](std::string_view, const Tensor& t, ad::Var& v) {
    v = tape.leaf(t);
  }, w, out);
  return out;
}

void accumulate_gradients(const ad::Tape& tape, const Weights<ad::Var>& bound,
                          Weights<Tensor>& acc, double scale) {
  Weights<Tensor>::visit([&](std::string_view, const ad::Var& v, Tensor& g) {
    g += scale * tape.grad(v);
  }, bound, acc);
}

}  // namespace attdmm
