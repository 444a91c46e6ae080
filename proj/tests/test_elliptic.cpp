#include "gapforge/elliptic.hpp"

#include <cmath>

#include "doctest.h"
#include "support.hpp"

using namespace gapforge;
using testsupport::agm_oracle_k;
using testsupport::sn_oracle;

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(EllipticParameter(-0.1), ValidationError);
  CHECK_THROWS_AS(EllipticParameter(1.0), ValidationError);
  CHECK_THROWS_AS(EllipticParameter(1.5), ValidationError);
  CHECK_THROWS_AS(EllipticParameter(std::nan("")), ValidationError);
  CHECK_NOTHROW(EllipticParameter(0.0));
  CHECK_NOTHROW(EllipticParameter(0.999));
}

TEST_CASE("complete elliptic integral K") {
  CHECK(complete_elliptic_k(EllipticParameter(0.0)) == doctest::Approx(M_PI / 2).epsilon(1e-14));
  CHECK(complete_elliptic_k(EllipticParameter(0.5)) ==
        doctest::Approx(1.854074677301372).epsilon(1e-12));

  // against the independent AGM oracle, to 12+ significant digits
  for (double m : {0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999}) {
    const double k = complete_elliptic_k(EllipticParameter(m));
    CHECK(std::abs(k - agm_oracle_k(m)) < 1e-12 * k);
  }

  // monotone increasing in m
  double prev = 0.0;
  for (double m = 0.0; m < 0.9995; m += 0.05) {
    const double k = complete_elliptic_k(EllipticParameter(m));
    CHECK(k > prev);
    prev = k;
  }
  CHECK(complete_elliptic_k(EllipticParameter(0.999)) >
        complete_elliptic_k(EllipticParameter(0.5)));
}

TEST_CASE("jacobi elliptic special points") {
  for (double m : {0.0, 0.3, 0.5, 0.9}) {
    const auto v = jacobi_elliptic(0.0, EllipticParameter(m));
    CHECK(std::abs(v.sn) < 1e-15);
    CHECK(v.cn == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(v.dn == doctest::Approx(1.0).epsilon(1e-15));
  }

  const EllipticParameter half(0.5);
  const double k_half = complete_elliptic_k(half);
  const auto quarter = jacobi_elliptic(k_half, half);
  CHECK(quarter.sn == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(quarter.cn) < 1e-12);
  CHECK(quarter.dn == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("jacobi elliptic against quadrature-inversion oracle") {
  // sn via numerical inversion of the incomplete elliptic integral
  const double m = 0.5;
  for (double x : {0.2, 0.5, 0.8, 1.2, 1.6}) {
    const auto v = jacobi_elliptic(x, EllipticParameter(m));
    CHECK(std::abs(v.sn - sn_oracle(x, m)) < 1e-10);
  }
  // a second parameter value
  const auto v = jacobi_elliptic(0.8, EllipticParameter(0.9));
  CHECK(std::abs(v.sn - sn_oracle(0.8, 0.9)) < 1e-10);
}

TEST_CASE("pythagorean identities on a dense grid") {
  for (double m : {0.1, 0.5, 0.9}) {
    const JacobiEvaluator eval(EllipticParameter{m});
    const double k = eval.quarter_period();
    for (int i = 0; i <= 400; ++i) {
      const double x = -4.0 * k + 8.0 * k * i / 400.0;
      const auto v = eval(x);
      CHECK(std::abs(v.sn * v.sn + v.cn * v.cn - 1.0) < 1e-12);
      CHECK(std::abs(v.dn * v.dn + m * v.sn * v.sn - 1.0) < 1e-12);
      CHECK(v.dn * v.dn >= 1.0 - m - 1e-12);
      CHECK(v.dn * v.dn <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("trigonometric degeneration at m = 0") {
  const JacobiEvaluator eval(EllipticParameter{0.0});
  CHECK(eval.quarter_period() == doctest::Approx(M_PI / 2).epsilon(1e-15));
  for (int i = 0; i <= 200; ++i) {
    const double x = -2.0 * M_PI + 4.0 * M_PI * i / 200.0;
    const auto v = eval(x);
    CHECK(std::abs(v.sn - std::sin(x)) < 1e-12);
    CHECK(std::abs(v.cn - std::cos(x)) < 1e-12);
    CHECK(std::abs(v.dn - 1.0) < 1e-12);
  }
}

TEST_CASE("periodicity: sn(x+4K) = sn(x), dn(x+2K) = dn(x)") {
  for (double m : {0.1, 0.5, 0.9}) {
    const JacobiEvaluator eval(EllipticParameter{m});
    const double k = eval.quarter_period();
    for (double x : {-1.3, 0.0, 0.4, 2.7}) {
      const auto a = eval(x);
      const auto b = eval(x + 4.0 * k);
      const auto c = eval(x + 2.0 * k);
      CHECK(std::abs(a.sn - b.sn) < 1e-12);
      CHECK(std::abs(a.cn - b.cn) < 1e-12);
      CHECK(std::abs(a.dn - c.dn) < 1e-12);
    }
  }
}

TEST_CASE("derivative identities by central differences") {
  const double h = 1e-5;
  for (double m : {0.1, 0.5, 0.9}) {
    const JacobiEvaluator eval(EllipticParameter{m});
    auto sn = [&](double x) { return eval(x).sn; };
    auto cn = [&](double x) { return eval(x).cn; };
    auto dn = [&](double x) { return eval(x).dn; };
    for (double x : {-2.1, -0.7, 0.3, 0.8, 1.9}) {
      const auto v = eval(x);
      CHECK(std::abs(testsupport::derivative(sn, x, h) - v.cn * v.dn) < 1e-7);
      CHECK(std::abs(testsupport::derivative(cn, x, h) + v.sn * v.dn) < 1e-7);
      CHECK(std::abs(testsupport::derivative(dn, x, h) + m * v.sn * v.cn) < 1e-7);
    }
  }
}

TEST_CASE("dn, cn, sn solve the band-edge equations of the Lame potential") {
  // -f'' + 2 m sn^2 f = eps f with eps = m, 1, 1+m respectively
  const double m = 0.5;
  const JacobiEvaluator eval(EllipticParameter{m});
  auto v0 = [&](double x) {
    const double sn = eval(x).sn;
    return 2.0 * m * sn * sn;
  };
  struct Case {
    std::function<double(double)> f;
    double eps;
  };
  const Case cases[] = {
      {[&](double x) { return eval(x).dn; }, m},
      {[&](double x) { return eval(x).cn; }, 1.0},
      {[&](double x) { return eval(x).sn; }, 1.0 + m},
  };
  for (const auto& c : cases) {
    for (double x : {-1.4, -0.2, 0.5, 1.1, 2.3}) {
      const double lhs = -testsupport::second_derivative(c.f, x, 1e-4) + v0(x) * c.f(x);
      CHECK(std::abs(lhs - c.eps * c.f(x)) < 1e-6);
    }
  }
}

TEST_CASE("lame potential") {
  const EllipticParameter m(0.5);
  const auto spec = lame_potential(m);
  const double k = complete_elliptic_k(m);

  CHECK(spec.period == doctest::Approx(2 * 1.854074677301372).epsilon(1e-12));
  CHECK(std::abs(spec(0.0)) < 1e-15);
  CHECK(spec(k) == doctest::Approx(1.0).epsilon(1e-12));

  // periodicity and range on a grid
  double vmin = 1e300, vmax = -1e300;
  for (int i = 0; i <= 500; ++i) {
    const double x = -2.0 * spec.period + 4.0 * spec.period * i / 500.0;
    const double v = spec(x);
    CHECK(std::abs(spec(x + spec.period) - v) < 1e-10);
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  CHECK(vmin >= -1e-14);
  CHECK(vmax <= 1.0 + 1e-14);
  CHECK(vmax == doctest::Approx(1.0).epsilon(1e-4));

  CHECK_THROWS_AS(lame_potential(EllipticParameter(1.0)), ValidationError);
}
