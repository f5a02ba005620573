#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <wavetrain/model.hpp>

using namespace wavetrain;
using nlohmann::json;

TEST_CASE("builtin pendulum matches its definition") {
  ModelSystem m = builtin_model("pendulum");
  CHECK(m.n() == 2);
  CHECK(m.d() == 1);
  Eigen::VectorXd u(2);
  u << 0.7, -1.3;
  Eigen::VectorXd f = m.flux(0, u);
  CHECK(f[0] == doctest::Approx(-1.3).epsilon(1e-14));
  CHECK(f[1] == doctest::Approx(-std::sin(0.7)).epsilon(1e-14));
}

TEST_CASE("linear polynomial flux has constant jacobian") {
  // f1(u) = (u2, -u1)
  json doc = {{"name", "rotation"},
              {"n", 2},
              {"d", 1},
              {"flux",
               {{
                   {{"kind", "poly"}, {"target", 0}, {"vars", {1}}, {"coeff", 1.0}},
                   {{"kind", "poly"}, {"target", 1}, {"vars", {0}}, {"coeff", -1.0}},
               }}}};
  ModelSystem m = load_model(doc);
  Eigen::VectorXd u = Eigen::VectorXd::Random(2);
  Eigen::MatrixXd J = m.jacobian(0, u);
  CHECK(J(0, 0) == 0.0);
  CHECK(J(0, 1) == 1.0);
  CHECK(J(1, 0) == -1.0);
  CHECK(J(1, 1) == 0.0);
}

TEST_CASE("malformed documents are rejected with a named field") {
  json doc = {{"name", "x"}, {"n", 2}, {"d", 1}};
  CHECK_THROWS_WITH_AS(load_model(doc), doctest::Contains("flux"), ModelError);
}

TEST_CASE("scalar systems are rejected") {
  json doc = {{"name", "x"}, {"n", 1}, {"d", 1}, {"flux", {json::array()}}};
  CHECK_THROWS_WITH_AS(load_model(doc), doctest::Contains("scalar"), ModelError);
}

TEST_CASE("unsupported dimension is rejected") {
  json doc = {{"name", "x"},
              {"n", 2},
              {"d", 3},
              {"flux", {json::array(), json::array(), json::array()}}};
  CHECK_THROWS_AS(load_model(doc), ModelError);
}

TEST_CASE("jacobians are finite-difference consistent on every catalog entry") {
  for (const auto& name : builtin_catalog_names()) {
    ModelSystem m = builtin_model(name);
    CAPTURE(name);
    CHECK(jacobian_consistency_error(m, 100) < 1e-6);
  }
}

TEST_CASE("finite-difference convergence order of the jacobian check is >= 1.9") {
  ModelSystem m = builtin_model("skew_pendulum");
  Eigen::VectorXd u(2), h(2);
  u << 0.4, 0.6;
  h << 0.8, -0.6;
  auto defect = [&](double eps) {
    Eigen::VectorXd lhs = m.flux(0, u + eps * h) - m.flux(0, u) - eps * m.jacobian(0, u) * h;
    return lhs.norm();
  };
  double order = std::log(defect(1e-3) / defect(1e-4)) / std::log(10.0);
  CHECK(order >= 1.9);
}

TEST_CASE("serialize/load round trip evaluates identically") {
  ModelSystem m = builtin_model("skew_pendulum");
  ModelSystem m2 = load_model(model_to_json(m));
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd u = Eigen::VectorXd::Random(2);
    CHECK((m.flux(0, u) - m2.flux(0, u)).norm() < 1e-12);
    CHECK((m.jacobian(0, u) - m2.jacobian(0, u)).norm() < 1e-12);
  }
}
