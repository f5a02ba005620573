#ifndef WAVETRAIN_MODEL_HPP
#define WAVETRAIN_MODEL_HPP

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace wavetrain {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One additive flux term: coeff * [sin|cos](u_arg) * prod_k u_{vars[k]}.
/// For kind "poly" there is no trig factor and vars is the full monomial.
/// For kind "sin"/"cos" the first entry of vars is the trig argument index
/// and the remaining entries form an optional monomial prefactor.
struct FluxTerm {
  enum class Kind { Poly, Sin, Cos };
  Kind kind = Kind::Poly;
  int target = 0;               // component of f this term contributes to
  std::vector<int> vars;        // variable indices, see above
  double coeff = 0.0;

  double eval(const Eigen::VectorXd& u) const {
    double val = coeff;
    std::size_t first = 0;
    if (kind != Kind::Poly) {
      val *= (kind == Kind::Sin) ? std::sin(u[vars[0]]) : std::cos(u[vars[0]]);
      first = 1;
    }
    for (std::size_t k = first; k < vars.size(); ++k) val *= u[vars[k]];
    return val;
  }

  /// Partial derivative with respect to u_i.
  double deriv(const Eigen::VectorXd& u, int i) const {
    double trig = 1.0, dtrig = 0.0;
    std::size_t first = 0;
    if (kind != Kind::Poly) {
      const double a = u[vars[0]];
      trig = (kind == Kind::Sin) ? std::sin(a) : std::cos(a);
      dtrig = (kind == Kind::Sin) ? std::cos(a) : -std::sin(a);
      first = 1;
    }
    double mono = 1.0;
    for (std::size_t k = first; k < vars.size(); ++k) mono *= u[vars[k]];
    double out = 0.0;
    if (kind != Kind::Poly && vars[0] == i) out += coeff * dtrig * mono;
    // product rule over the monomial factors
    for (std::size_t k = first; k < vars.size(); ++k) {
      if (vars[k] != i) continue;
      double rest = 1.0;
      for (std::size_t l = first; l < vars.size(); ++l)
        if (l != k) rest *= u[vars[l]];
      out += coeff * trig * rest;
    }
    return out;
  }
};

/// A parabolic system of conservation laws u_t + sum_j f^j(u)_{x_j} = Lap u,
/// with fluxes given by analytic term tables so exact Jacobians are available.
class ModelSystem {
 public:
  ModelSystem(std::string name, int n, int d, std::vector<std::vector<FluxTerm>> flux,
              int smoothness_order = 16)
      : name_(std::move(name)), n_(n), d_(d), flux_(std::move(flux)), K_(smoothness_order) {
    if (n_ == 1) throw ModelError("scalar systems admit no periodic profiles");
    if (n_ < 2) throw ModelError("state dimension n must be >= 2");
    if (d_ != 1 && d_ != 2) throw ModelError("unsupported spatial dimension d (must be 1 or 2)");
    if (int(flux_.size()) != d_) throw ModelError("flux: expected one term list per dimension");
    for (const auto& terms : flux_)
      for (const auto& t : terms) {
        if (t.target < 0 || t.target >= n_) throw ModelError("flux term: target out of range");
        if ((t.kind != FluxTerm::Kind::Poly) && t.vars.empty())
          throw ModelError("flux term: trig term needs an argument index");
        for (int v : t.vars)
          if (v < 0 || v >= n_) throw ModelError("flux term: variable index out of range");
      }
  }

  const std::string& name() const { return name_; }
  int n() const { return n_; }
  int d() const { return d_; }
  int smoothness_order() const { return K_; }

  Eigen::VectorXd flux(int j, const Eigen::VectorXd& u) const {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n_);
    for (const auto& t : flux_[j]) f[t.target] += t.eval(u);
    return f;
  }

  Eigen::MatrixXd jacobian(int j, const Eigen::VectorXd& u) const {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n_, n_);
    for (const auto& t : flux_[j])
      for (int i = 0; i < n_; ++i) J(t.target, i) += t.deriv(u, i);
    return J;
  }

  const std::vector<std::vector<FluxTerm>>& terms() const { return flux_; }

 private:
  std::string name_;
  int n_, d_, K_;
  std::vector<std::vector<FluxTerm>> flux_;
};

// ---------------------------------------------------------------------------
// Builtin catalog
// ---------------------------------------------------------------------------

/// Pendulum system: f1(u) = (u2, -sin u1), closed profile orbits at s=q=0.
inline ModelSystem make_pendulum(int d = 1, double transverse_coupling = 0.2) {
  std::vector<std::vector<FluxTerm>> flux(d);
  flux[0] = {
      {FluxTerm::Kind::Poly, 0, {1}, 1.0},
      {FluxTerm::Kind::Sin, 1, {0}, -1.0},
  };
  if (d == 2) {
    flux[1] = {
        {FluxTerm::Kind::Poly, 0, {0}, transverse_coupling},
        {FluxTerm::Kind::Poly, 1, {1}, transverse_coupling},
    };
  }
  return ModelSystem(d == 1 ? "pendulum" : "pendulum2d", 2, d, std::move(flux));
}

/// Pendulum orbits traversed at u2-modulated speed: f = (1+g*u2)(u2, -sin u1).
/// Same closed orbit curves, but the x -> -x reversal symmetry is broken.
inline ModelSystem make_skew_pendulum(double gamma = 0.3, int d = 1,
                                      double transverse_coupling = 0.2) {
  std::vector<std::vector<FluxTerm>> flux(d);
  flux[0] = {
      {FluxTerm::Kind::Poly, 0, {1}, 1.0},
      {FluxTerm::Kind::Poly, 0, {1, 1}, gamma},
      {FluxTerm::Kind::Sin, 1, {0}, -1.0},
      {FluxTerm::Kind::Sin, 1, {0, 1}, -gamma},
  };
  if (d == 2) {
    flux[1] = {
        {FluxTerm::Kind::Poly, 0, {0}, transverse_coupling},
        {FluxTerm::Kind::Poly, 1, {1}, transverse_coupling},
    };
  }
  return ModelSystem(d == 1 ? "skew_pendulum" : "skew_pendulum2d", 2, d, std::move(flux));
}

/// Lienard oscillator flux: f1(u) = (u2, -u1 + delta*(1 - u1^2)*u2).
/// The profile field at s=0, q=0 is the Van der Pol system, whose unique
/// attracting limit cycle gives an isolated (hyperbolic) periodic profile.
/// Unlike the pendulum family, its three characteristic speeds are real and
/// well separated, so the first-order dispersion theory is non-degenerate.
inline ModelSystem make_lienard(double delta = 2.5, int d = 1,
                                double transverse_coupling = 0.2) {
  std::vector<std::vector<FluxTerm>> flux(d);
  flux[0] = {
      {FluxTerm::Kind::Poly, 0, {1}, 1.0},
      {FluxTerm::Kind::Poly, 1, {0}, -1.0},
      {FluxTerm::Kind::Poly, 1, {1}, delta},
      {FluxTerm::Kind::Poly, 1, {0, 0, 1}, -delta},
  };
  if (d == 2) {
    flux[1] = {
        {FluxTerm::Kind::Poly, 0, {0}, transverse_coupling},
        {FluxTerm::Kind::Poly, 1, {1}, transverse_coupling},
    };
  }
  return ModelSystem(d == 1 ? "lienard" : "lienard2d", 2, d, std::move(flux));
}

/// Zero flux: the system decouples into n heat equations (control model).
inline ModelSystem make_heat(int n = 2, int d = 1) {
  return ModelSystem(d == 1 ? "heat" : "heat2d", n, d,
                     std::vector<std::vector<FluxTerm>>(d));
}

inline ModelSystem builtin_model(const std::string& name) {
  if (name == "pendulum") return make_pendulum(1);
  if (name == "pendulum2d") return make_pendulum(2);
  if (name == "skew_pendulum") return make_skew_pendulum(0.3, 1);
  if (name == "skew_pendulum2d") return make_skew_pendulum(0.3, 2);
  if (name == "lienard") return make_lienard(2.5, 1);
  if (name == "lienard2d") return make_lienard(2.5, 2);
  if (name == "heat") return make_heat(2, 1);
  if (name == "heat2d") return make_heat(2, 2);
  throw ModelError("unknown builtin model: " + name);
}

inline std::vector<std::string> builtin_catalog_names() {
  return {"pendulum",        "pendulum2d", "skew_pendulum", "skew_pendulum2d",
          "lienard",         "lienard2d",  "heat",          "heat2d"};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline FluxTerm flux_term_from_json(const nlohmann::json& j) {
  FluxTerm t;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "poly")
    t.kind = FluxTerm::Kind::Poly;
  else if (kind == "sin")
    t.kind = FluxTerm::Kind::Sin;
  else if (kind == "cos")
    t.kind = FluxTerm::Kind::Cos;
  else
    throw ModelError("flux term: unknown kind '" + kind + "'");
  t.target = j.at("target").get<int>();
  t.vars = j.at("vars").get<std::vector<int>>();
  t.coeff = j.at("coeff").get<double>();
  return t;
}

inline nlohmann::json flux_term_to_json(const FluxTerm& t) {
  const char* kind = t.kind == FluxTerm::Kind::Poly ? "poly"
                     : t.kind == FluxTerm::Kind::Sin ? "sin"
                                                     : "cos";
  return {{"kind", kind}, {"target", t.target}, {"vars", t.vars}, {"coeff", t.coeff}};
}

/// Parse a model config document. Accepts either {"builtin": "<name>"} or an
/// explicit {"name","n","d","flux"} description with per-dimension term lists.
inline ModelSystem load_model(const nlohmann::json& doc) {
  if (doc.contains("builtin")) return builtin_model(doc.at("builtin").get<std::string>());
  for (const char* field : {"name", "n", "d", "flux"})
    if (!doc.contains(field)) throw ModelError(std::string("model config: missing field '") + field + "'");
  const int n = doc.at("n").get<int>();
  const int d = doc.at("d").get<int>();
  if (!doc.at("flux").is_array()) throw ModelError("model config: 'flux' must be an array");
  std::vector<std::vector<FluxTerm>> flux;
  for (const auto& per_j : doc.at("flux")) {
    std::vector<FluxTerm> terms;
    for (const auto& jt : per_j) terms.push_back(flux_term_from_json(jt));
    flux.push_back(std::move(terms));
  }
  int K = doc.value("smoothness_order", 16);
  return ModelSystem(doc.at("name").get<std::string>(), n, d, std::move(flux), K);
}

inline nlohmann::json model_to_json(const ModelSystem& m) {
  nlohmann::json flux = nlohmann::json::array();
  for (const auto& per_j : m.terms()) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : per_j) terms.push_back(flux_term_to_json(t));
    flux.push_back(terms);
  }
  return {{"name", m.name()},
          {"n", m.n()},
          {"d", m.d()},
          {"smoothness_order", m.smoothness_order()},
          {"flux", flux}};
}

/// Max relative finite-difference inconsistency of the analytic Jacobian over
/// `trials` random points. Should be O(eps) for exact Jacobians.
inline double jacobian_consistency_error(const ModelSystem& m, int trials = 100,
                                         double eps = 1e-6, unsigned seed = 12345) {
  std::srand(seed);
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    Eigen::VectorXd u = Eigen::VectorXd::Random(m.n());
    Eigen::VectorXd h = Eigen::VectorXd::Random(m.n()).normalized();
    for (int j = 0; j < m.d(); ++j) {
      Eigen::VectorXd df = (m.flux(j, u + eps * h) - m.flux(j, u - eps * h)) / (2 * eps);
      Eigen::VectorXd an = m.jacobian(j, u) * h;
      double scale = std::max(1.0, an.norm());
      worst = std::max(worst, (df - an).norm() / scale);
    }
  }
  return worst;
}

}  // namespace wavetrain

#endif
