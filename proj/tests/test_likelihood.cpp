#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mccov/likelihood.hpp"
#include "oracles.hpp"

using namespace mccov;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

struct Fixture {
  PosteriorSpec spec;
};

// Small joint spec: 3 regions in a path, ages 0..14, reporting years
// 2009..2013, two surveys, programme rows, two free share parameters.
Fixture make_small_spec(unsigned seed, bool with_programme = true) {
  auto grid = make_grid({"r1", "r2", "r3"}, 14, 2009, 2013, 8);
  auto graph = make_adjacency(3, {{0, 1}, {1, 2}});

  std::mt19937 gen(seed);
  std::uniform_int_distribution<int> birth(1996, 2012);
  std::uniform_int_distribution<int> region(0, 2);
  std::uniform_int_distribution<int> outcome(0, 3);
  std::uniform_real_distribution<double> wdist(0.3, 2.5);
  std::vector<SurveyRecord> records;
  while (records.size() < 300) {
    SurveyRecord r;
    r.survey_id = records.size() % 2 ? "s1" : "s2";
    r.region = grid.regions[region(gen)];
    r.birth_year = birth(gen);
    r.outcome = static_cast<SurveyOutcome>(outcome(gen));
    std::uniform_int_distribution<int> age(0, std::min(14, 2013 - r.birth_year));
    r.event_age = age(gen);
    r.weight = wdist(gen);
    records.push_back(r);
  }
  auto ingest = ingest_surveys(records, grid);
  auto structure = make_model_structure(ingest.extended_grid, graph, {5.0, 2});
  auto shares = resolve_shares(
      {{{"r2"}, 2012, 2013, ShareEntry::Mode::LogitNormal, 0.0, 1.0, 0.7}},
      ingest.extended_grid);

  LexisField pop(3, structure.n_ages(), structure.n_years(), 0.0);
  std::uniform_real_distribution<double> pdist(100.0, 2000.0);
  for (auto& v : pop.values) v = pdist(gen);

  std::vector<ProgrammeCount> prog;
  if (with_programme)
    for (int year : {2011, 2012, 2013})
      for (const auto& r : grid.regions)
        prog.push_back({r, year, 8, 14, std::floor(pdist(gen) / 10.0)});

  Fixture fx{make_posterior_spec(structure, shares, std::move(ingest.cube), std::move(prog),
                                 std::move(pop))};
  return fx;
}

Eigen::VectorXd random_point(const ParameterLayout& L, unsigned seed, double scale = 0.3) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::VectorXd x(L.dim);
  for (int i = 0; i < L.dim; ++i) x[i] = nd(gen);
  return x;
}

// Independent dense evaluation of every prior term. AR1 precisions come
// from inverting the correlation matrix; log-determinants and ranks from
// eigendecompositions; Kronecker blocks from the dense product.
double dense_prior_oracle(const Eigen::VectorXd& x, const PosteriorSpec& spec) {
  const auto& L = spec.layout;
  const auto& st = spec.structure;
  const auto& hp = spec.hyper;
  const int ni = st.n_regions(), nj = st.n_basis(), nt = st.n_years();
  const double* xs = x.data() + L.offset(ParamBlock::LogSigma);
  const double* xr = x.data() + L.offset(ParamBlock::LogitRho);

  Eigen::MatrixXd q_space = Eigen::MatrixXd::Zero(ni, ni);
  for (auto [a, b] : st.graph.edges) {
    q_space(a, a) += 1;
    q_space(b, b) += 1;
    q_space(a, b) -= 1;
    q_space(b, a) -= 1;
  }
  for (int i = 0; i < ni; ++i)
    if (st.graph.neighbor_counts[i] == 0) q_space(i, i) = 1.0;

  auto ar1 = [](int n, double logit) {
    const double rho = 2.0 / (1.0 + std::exp(-logit)) - 1.0;
    return Eigen::MatrixXd(oracle::ar1_correlation(n, rho).inverse());
  };
  auto gauss = [&](const Eigen::VectorXd& v, const Eigen::MatrixXd& q, double s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
    int rank = 0;
    double logdet = 0.0;
    const double tol = 1e-8 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    for (int k = 0; k < es.eigenvalues().size(); ++k)
      if (es.eigenvalues()[k] > tol) {
        ++rank;
        logdet += std::log(es.eigenvalues()[k]);
      }
    const double tau = std::exp(-2.0 * s);
    return 0.5 * tau * v.dot(q * v) + rank * s - 0.5 * logdet + 0.5 * rank * kLog2Pi;
  };
  auto seg = [&](ParamBlock b) { return Eigen::VectorXd(L.segment(x, b)); };

  double nlp = 0.0;
  for (ParamBlock b : {ParamBlock::AlphaTmic, ParamBlock::AlphaMmcPaed, ParamBlock::AlphaMmcAdult}) {
    const double v = x[L.offset(b)];
    nlp += 0.5 * v * v / (hp.intercept_sd * hp.intercept_sd) + std::log(hp.intercept_sd) +
           0.5 * kLog2Pi;
  }
  for (int k = 0; k < kNumSigmas; ++k) nlp += hp.sd_rate * std::exp(xs[k]) - std::log(hp.sd_rate) - xs[k];
  for (int k = 0; k < kNumRhos; ++k) {
    const double z = (xr[k] - hp.rho_mean) / hp.rho_sd;
    nlp += 0.5 * z * z + std::log(hp.rho_sd) + 0.5 * kLog2Pi;
  }
  for (int k = 0; k < L.n_free_shares; ++k) {
    const double z =
        (x[L.offset(ParamBlock::LogitP) + k] - spec.shares.free_mu[k]) / spec.shares.free_sigma[k];
    nlp += 0.5 * z * z + std::log(spec.shares.free_sigma[k]) + 0.5 * kLog2Pi;
  }

  nlp += gauss(seg(ParamBlock::PsiTmic), q_space, xs[kSigmaPsiTmic]);
  nlp += gauss(seg(ParamBlock::PsiMmcPaed), q_space, xs[kSigmaPsiPaed]);
  nlp += gauss(seg(ParamBlock::PsiMmcAdult), q_space, xs[kSigmaPsiAdult]);
  nlp += gauss(seg(ParamBlock::PhiTmicW), ar1(nj, xr[kRhoPhiTmic]), xs[kSigmaPhiTmic]);
  nlp += gauss(seg(ParamBlock::PhiMmcPaedW), ar1(nj, xr[kRhoPhiPaed]), xs[kSigmaPhiPaed]);
  nlp += gauss(seg(ParamBlock::PhiMmcAdultW), ar1(nj, xr[kRhoPhiAdult]), xs[kSigmaPhiAdult]);
  nlp += gauss(seg(ParamBlock::Theta), ar1(nt, xr[kRhoTheta]), xs[kSigmaTheta]);
  nlp += gauss(seg(ParamBlock::GammaTmicW),
               oracle::dense_kronecker(ar1(nj, xr[kRhoGammaTmic]), q_space), xs[kSigmaGammaTmic]);
  nlp += gauss(seg(ParamBlock::GammaMmcPaedW),
               oracle::dense_kronecker(ar1(nj, xr[kRhoGammaPaed]), q_space), xs[kSigmaGammaPaed]);
  nlp += gauss(seg(ParamBlock::GammaMmcAdultW),
               oracle::dense_kronecker(ar1(nj, xr[kRhoGammaAdult]), q_space),
               xs[kSigmaGammaAdult]);
  nlp += gauss(seg(ParamBlock::DeltaW),
               oracle::dense_kronecker(ar1(nj, xr[kRhoDeltaAge]), ar1(nt, xr[kRhoDeltaTime])),
               xs[kSigmaDelta]);
  nlp += gauss(seg(ParamBlock::Zeta), oracle::dense_kronecker(q_space, ar1(nt, xr[kRhoZeta])),
               xs[kSigmaZeta]);

  // soft sum-to-zero penalties over spatial components of size >= 2
  const double kappa = spec.constraint_penalty;
  for (const auto& comp : st.graph.components()) {
    if (comp.size() < 2) continue;
    for (ParamBlock b : {ParamBlock::PsiTmic, ParamBlock::PsiMmcPaed, ParamBlock::PsiMmcAdult}) {
      double sum = 0.0;
      for (int i : comp) sum += x[L.offset(b) + i];
      nlp += kappa * sum * sum;
    }
    for (ParamBlock b :
         {ParamBlock::GammaTmicW, ParamBlock::GammaMmcPaedW, ParamBlock::GammaMmcAdultW})
      for (int j = 0; j < nj; ++j) {
        double sum = 0.0;
        for (int i : comp) sum += x[L.offset(b) + j * ni + i];
        nlp += kappa * sum * sum;
      }
    for (int t = 0; t < nt; ++t) {
      double sum = 0.0;
      for (int i : comp) sum += x[L.offset(ParamBlock::Zeta) + i * nt + t];
      nlp += kappa * sum * sum;
    }
  }
  return nlp;
}

}  // namespace

TEST_CASE("survey_nll basics") {
  auto grid = make_grid({"r1"}, 5, 2000, 2005, 2);
  auto cube = make_cube(grid);
  HazardField f;
  f.tmic = f.mmc_raw = f.mmc_nt = f.mmc_t = f.tmc = LexisField(1, 6, 6, 0.2);
  f.uc = LexisField(1, 6, 6, 0.64);
  CoverageField cov;
  cov.survivor = LexisField(1, 6, 6, 0.5);
  for (auto& x : cov.incidence) x = LexisField(1, 6, 6, 0.0);
  for (auto& x : cov.cif) x = LexisField(1, 6, 6, 0.0);

  SUBCASE("all-zero cube gives zero") { CHECK(survey_nll(cube, cov, f) == 0.0); }

  SUBCASE("one right-censored cell") {
    cube.of(SurveyOutcome::RightCensored).at(0, 3, 3) = 2.0;
    CHECK(survey_nll(cube, cov, f) == doctest::Approx(-2.0 * std::log(0.5)).epsilon(1e-12));
    CHECK(survey_nll(cube, cov, f) == doctest::Approx(1.3862943611198906).epsilon(1e-10));
  }

  SUBCASE("zero-count cells contribute nothing even when clamped") {
    cov.survivor.fill(0.0);  // would hit the floor if counted
    CHECK(survey_nll(cube, cov, f) == 0.0);
  }

  SUBCASE("clamped cell with positive count warns") {
    cov.survivor.at(0, 2, 2) = 0.0;
    cube.of(SurveyOutcome::RightCensored).at(0, 2, 2) = 1.0;
    Diagnostics diag;
    const double v = survey_nll(cube, cov, f, &diag);
    CHECK(v == doctest::Approx(-std::log(kProbClamp)));
    CHECK(diag.clamped_likelihood_cells == 1);
  }
}

TEST_CASE("survey_nll matches a term-by-term oracle on random inputs") {
  auto fx = make_small_spec(17);
  auto x = random_point(fx.spec.layout, 3);
  auto f = compute_hazards(x, fx.spec.layout, fx.spec.structure, fx.spec.shares);
  auto cov = compute_survivor_and_cif(f, fx.spec.grid());
  const double got = survey_nll(fx.spec.cube, cov, f);

  double want = 0.0;
  const auto& grid = fx.spec.grid();
  for (int i = 0; i < grid.n_regions(); ++i)
    for (int a = 0; a < grid.n_ages(); ++a)
      for (int t = 0; t < grid.n_years(); ++t) {
        const double s = cov.survivor.at(i, a, t);
        auto lg = [](double v) { return std::log(std::max(v, kProbClamp)); };
        want -= fx.spec.cube.of(SurveyOutcome::Tmic).at(i, a, t) * (lg(s) + lg(f.tmic.at(i, a, t)));
        want -= fx.spec.cube.of(SurveyOutcome::MmcNt).at(i, a, t) *
                (lg(s) + lg(f.mmc_nt.at(i, a, t)));
        want -= fx.spec.cube.of(SurveyOutcome::RightCensored).at(i, a, t) * lg(s);
        want -= fx.spec.cube.of(SurveyOutcome::LeftCensored).at(i, a, t) * lg(1.0 - s);
      }
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("programme_nll basics") {
  SUBCASE("y=0, mu=1 contributes exactly one") {
    CHECK(programme_nll({{"r", 2000, 0, 1, 0.0}}, {1.0}) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("y = mu minimizes the contribution") {
    const double y = 3.0;
    auto val = [&](double mu) { return programme_nll({{"r", 2000, 0, 1, y}}, {mu}); };
    CHECK(val(y) < val(y + 0.01));
    CHECK(val(y) < val(y - 0.01));
  }
  SUBCASE("batch equals sum of single rows") {
    std::vector<ProgrammeCount> rows;
    std::vector<double> mus;
    std::mt19937 gen(4);
    std::uniform_real_distribution<double> u(0.5, 30.0);
    double singles = 0.0;
    for (int k = 0; k < 10; ++k) {
      rows.push_back({"r", 2000, 0, 1, std::floor(u(gen))});
      mus.push_back(u(gen));
      singles += programme_nll({rows.back()}, {mus.back()});
    }
    CHECK(programme_nll(rows, mus) == doctest::Approx(singles).epsilon(1e-12));
  }
  SUBCASE("zero mu against positive count clamps with warning") {
    Diagnostics diag;
    const double v = programme_nll({{"r", 2000, 0, 1, 2.0}}, {0.0}, &diag);
    CHECK(std::isfinite(v));
    CHECK(diag.clamped_likelihood_cells == 1);
  }
}

TEST_CASE("prior_nlp equals the dense density oracle") {
  auto fx = make_small_spec(23);

  SUBCASE("all blocks zero, sigma at the prior mode") {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(fx.spec.layout.dim);
    const double got = prior_nlp(x, fx.spec);
    CHECK(std::isfinite(got));
    CHECK(got == doctest::Approx(dense_prior_oracle(x, fx.spec)).epsilon(1e-7));
  }
  SUBCASE("random point") {
    for (unsigned seed : {1u, 9u}) {
      auto x = random_point(fx.spec.layout, seed, 0.6);
      CHECK(prior_nlp(x, fx.spec) ==
            doctest::Approx(dense_prior_oracle(x, fx.spec)).epsilon(1e-7));
    }
  }
}

TEST_CASE("doubling one effect block quadruples its quadratic share") {
  auto fx = make_small_spec(29);
  const auto& L = fx.spec.layout;
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(L.dim);
  Eigen::VectorXd x1 = x0, x2 = x0;
  std::mt19937 gen(2);
  std::normal_distribution<double> nd(0, 1);
  for (int k = 0; k < L.size(ParamBlock::Theta); ++k) {
    const double v = nd(gen);
    x1[L.offset(ParamBlock::Theta) + k] = v;
    x2[L.offset(ParamBlock::Theta) + k] = 2 * v;
  }
  const double base = prior_nlp(x0, fx.spec);
  const double q1 = prior_nlp(x1, fx.spec) - base;
  const double q4 = prior_nlp(x2, fx.spec) - base;
  CHECK(q4 == doctest::Approx(4.0 * q1).epsilon(1e-10));
}

TEST_CASE("correlation prior calibration on the real scale") {
  const double rho_mode = logit_rho_to_rho(3.0);
  CHECK(rho_mode == doctest::Approx(0.9051482536448664).epsilon(1e-12));
  const double lo = logit_rho_to_rho(3.0 - 1.96);
  const double hi = logit_rho_to_rho(3.0 + 1.96);
  CHECK(std::abs(lo - 0.48) < 0.005);
  CHECK(std::abs(hi - 0.99) < 0.005);
}

TEST_CASE("total_nlp composition") {
  auto fx = make_small_spec(31);
  auto x = random_point(fx.spec.layout, 7);

  SUBCASE("empty data reduces to the prior") {
    auto grid = fx.spec.grid();
    auto empty = make_posterior_spec(fx.spec.structure, fx.spec.shares, make_cube(grid), {},
                                     LexisField(grid.n_regions(), grid.n_ages(), grid.n_years()));
    CHECK(total_nlp(x, empty) == doctest::Approx(prior_nlp(x, empty)).epsilon(1e-12));
  }

  SUBCASE("a duplicate programme row adds exactly its own contribution") {
    auto spec2 = fx.spec;
    spec2.programme.push_back(spec2.programme.front());
    const double before = total_nlp(x, fx.spec);
    const double after = total_nlp(x, spec2);

    auto f = compute_hazards(x, fx.spec.layout, fx.spec.structure, fx.spec.shares);
    auto cov = compute_survivor_and_cif(f, fx.spec.grid());
    auto mu = expected_programme_counts(cov, f, fx.spec.population,
                                        {fx.spec.programme.front()}, fx.spec.grid());
    const double row = programme_nll({fx.spec.programme.front()}, mu);
    CHECK(after - before == doctest::Approx(row).epsilon(1e-9));
  }

  SUBCASE("withholding programme data removes exactly the programme term") {
    auto fx2 = make_small_spec(31, false);
    auto b_with = total_nlp_breakdown(x, fx.spec);
    auto b_without = total_nlp_breakdown(x, fx2.spec);
    CHECK(b_without.programme == 0.0);
    CHECK(b_with.survey == doctest::Approx(b_without.survey).epsilon(1e-12));
    CHECK(b_with.prior == doctest::Approx(b_without.prior).epsilon(1e-12));
    CHECK(b_with.total - b_with.programme == doctest::Approx(b_without.total).epsilon(1e-12));
  }
}

TEST_CASE("total_nlp matches an independently coded monolithic evaluator") {
  auto fx = make_small_spec(37);
  auto x = random_point(fx.spec.layout, 11, 0.4);
  const auto& L = fx.spec.layout;
  const auto& st = fx.spec.structure;
  const auto& grid = st.grid;
  const auto& W = st.basis.design;
  const int ni = st.n_regions(), na = st.n_ages(), nt = st.n_years(), nj = st.n_basis();

  // hazards by naive predictor loops
  auto invlogit = [](double e) { return 1.0 / (1.0 + std::exp(-e)); };
  auto clamp = [](double p) { return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp); };
  LexisField lam_t(ni, na, nt), lam_r(ni, na, nt), lam_nt(ni, na, nt), lam_mt(ni, na, nt),
      uc(ni, na, nt, 1.0);
  for (int i = 0; i < ni; ++i)
    for (int a = 0; a < na; ++a)
      for (int t = 0; t < nt; ++t) {
        if (a > st.terminal_age) continue;
        double phi_t = 0, gam_t = 0, phi_m = 0, gam_m = 0, del = 0;
        for (int j = 0; j < nj; ++j) {
          phi_t += W(a, j) * x[L.offset(ParamBlock::PhiTmicW) + j];
          gam_t += W(a, j) * x[L.offset(ParamBlock::GammaTmicW) + j * ni + i];
          if (a < grid.paediatric_cutoff) {
            phi_m += W(a, j) * x[L.offset(ParamBlock::PhiMmcPaedW) + j];
            gam_m += W(a, j) * x[L.offset(ParamBlock::GammaMmcPaedW) + j * ni + i];
          } else {
            phi_m += W(a, j) * x[L.offset(ParamBlock::PhiMmcAdultW) + j];
            gam_m += W(a, j) * x[L.offset(ParamBlock::GammaMmcAdultW) + j * ni + i];
            del += W(a, j) * x[L.offset(ParamBlock::DeltaW) + j * nt + t];
          }
        }
        const double lt = clamp(invlogit(x[L.offset(ParamBlock::AlphaTmic)] +
                                         x[L.offset(ParamBlock::PsiTmic) + i] + phi_t + gam_t));
        double eta_m;
        if (a < grid.paediatric_cutoff)
          eta_m = x[L.offset(ParamBlock::AlphaMmcPaed)] + x[L.offset(ParamBlock::PsiMmcPaed) + i] +
                  phi_m + gam_m;
        else
          eta_m = x[L.offset(ParamBlock::AlphaMmcAdult)] +
                  x[L.offset(ParamBlock::PsiMmcAdult) + i] + phi_m +
                  x[L.offset(ParamBlock::Theta) + t] + gam_m + del +
                  x[L.offset(ParamBlock::Zeta) + i * nt + t];
        const double lr = clamp(invlogit(eta_m));
        double p = 0.0;
        const auto& cell = fx.spec.shares.at(i, t);
        if (cell.mode == ShareEntry::Mode::FixedValue) p = cell.value;
        if (cell.free_index >= 0)
          p = invlogit(x[L.offset(ParamBlock::LogitP) + cell.free_index]);
        lam_t.at(i, a, t) = lt;
        lam_r.at(i, a, t) = lr;
        lam_nt.at(i, a, t) = lr * (1 - lt);
        lam_mt.at(i, a, t) = p * lt;
        uc.at(i, a, t) = (1 - lt) * (1 - lr);
      }

  // survivor by a direct product per cell
  LexisField surv(ni, na, nt, 1.0);
  for (int i = 0; i < ni; ++i)
    for (int a = 0; a < na; ++a)
      for (int t = 0; t < nt; ++t) {
        double s = 1.0;
        for (int k = 0; k < a; ++k) {
          const int tk = t - a + k;
          if (tk >= 0) s *= uc.at(i, k, tk);
        }
        surv.at(i, a, t) = s;
      }

  auto lg = [](double v) { return std::log(std::max(v, kProbClamp)); };
  double want = 0.0;
  for (int i = 0; i < ni; ++i)
    for (int a = 0; a < na; ++a)
      for (int t = 0; t < nt; ++t) {
        want -= fx.spec.cube.of(SurveyOutcome::Tmic).at(i, a, t) *
                (lg(surv.at(i, a, t)) + lg(lam_t.at(i, a, t)));
        want -= fx.spec.cube.of(SurveyOutcome::MmcNt).at(i, a, t) *
                (lg(surv.at(i, a, t)) + lg(lam_nt.at(i, a, t)));
        want -= fx.spec.cube.of(SurveyOutcome::RightCensored).at(i, a, t) * lg(surv.at(i, a, t));
        want -=
            fx.spec.cube.of(SurveyOutcome::LeftCensored).at(i, a, t) * lg(1.0 - surv.at(i, a, t));
      }
  for (const auto& row : fx.spec.programme) {
    const int i = grid.region_index(row.region);
    const int t = grid.year_index(row.year);
    double mu = 0.0;
    for (int a = row.age_lo; a <= row.age_hi; ++a)
      mu += fx.spec.population.at(i, a, t) * surv.at(i, a, t) *
            (lam_nt.at(i, a, t) + lam_mt.at(i, a, t));
    want += mu - row.count * lg(mu) + std::lgamma(row.count + 1.0);
  }
  want += dense_prior_oracle(x, fx.spec);

  CHECK(total_nlp(x, fx.spec) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("analytic gradient matches central finite differences") {
  auto fx = make_small_spec(41);
  const auto& L = fx.spec.layout;
  Eigen::VectorXd grad(L.dim);
  for (unsigned seed = 0; seed < 20; ++seed) {
    auto x = random_point(L, 100 + seed, 0.3);
    const double f0 = total_nlp_grad(x, fx.spec, grad);
    CHECK(std::isfinite(f0));
    double worst = 0.0;
    for (int k = 0; k < L.dim; ++k) {
      const double h = 1e-5 * std::max(1.0, std::abs(x[k]));
      Eigen::VectorXd xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      const double fd = (total_nlp(xp, fx.spec) - total_nlp(xm, fx.spec)) / (2 * h);
      const double rel = std::abs(grad[k] - fd) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, rel);
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("scaling one survey's weights leaves cube and likelihood unchanged") {
  auto grid = make_grid({"r1", "r2", "r3"}, 14, 2009, 2013, 8);
  std::mt19937 gen(90);
  std::uniform_int_distribution<int> birth(1999, 2012);
  std::uniform_int_distribution<int> region(0, 2);
  std::uniform_int_distribution<int> outcome(0, 3);
  std::uniform_real_distribution<double> wdist(0.3, 2.5);
  std::vector<SurveyRecord> records;
  while (records.size() < 200) {
    SurveyRecord r;
    r.survey_id = records.size() % 2 ? "s1" : "s2";
    r.region = grid.regions[region(gen)];
    r.birth_year = birth(gen);
    r.outcome = static_cast<SurveyOutcome>(outcome(gen));
    std::uniform_int_distribution<int> age(0, std::min(14, 2013 - r.birth_year));
    r.event_age = age(gen);
    r.weight = wdist(gen);
    records.push_back(r);
  }
  auto scaled = records;
  for (auto& r : scaled)
    if (r.survey_id == "s1") r.weight *= 7.0;

  auto in0 = ingest_surveys(records, grid);
  auto in1 = ingest_surveys(scaled, grid);
  double max_diff = 0.0;
  for (int l = 0; l < kNumOutcomes; ++l)
    for (std::size_t c = 0; c < in0.cube.counts[l].values.size(); ++c)
      max_diff = std::max(max_diff,
                          std::abs(in0.cube.counts[l].values[c] - in1.cube.counts[l].values[c]));
  CHECK(max_diff < 1e-9);

  auto graph = make_adjacency(3, {{0, 1}, {1, 2}});
  auto structure = make_model_structure(in0.extended_grid, graph, {5.0, 2});
  auto shares = resolve_shares({}, in0.extended_grid);
  LexisField pop(3, structure.n_ages(), structure.n_years(), 500.0);
  auto s0 = make_posterior_spec(structure, shares, std::move(in0.cube), {}, pop);
  auto s1 = make_posterior_spec(structure, shares, std::move(in1.cube), {}, pop);
  for (unsigned seed : {5u, 6u}) {
    auto x = random_point(s0.layout, seed);
    const double v0 = total_nlp(x, s0);
    const double v1 = total_nlp(x, s1);
    CHECK(std::abs(v0 - v1) <= 1e-9 * std::max(1.0, std::abs(v0)));
  }
}
