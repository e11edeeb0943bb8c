#include "mccov/likelihood.hpp"

#include <cmath>

namespace mccov {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kEps = kProbClamp;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double safe_log(double x, bool* at_floor = nullptr) {
  if (x <= kEps) {
    if (at_floor) *at_floor = true;
    return std::log(kEps);
  }
  return std::log(x);
}

}  // namespace

PosteriorSpec make_posterior_spec(ModelStructure structure, ShareMap shares,
                                  EventCountCube cube, std::vector<ProgrammeCount> programme,
                                  LexisField population, HyperPriors hyper) {
  PosteriorSpec spec;
  spec.structure = std::move(structure);
  spec.shares = std::move(shares);
  spec.layout = make_layout(spec.structure, spec.shares);
  const Grid& grid = spec.structure.grid;
  for (const auto& f : cube.counts)
    if (f.n_regions != grid.n_regions() || f.n_ages != grid.n_ages() ||
        f.n_years != grid.n_years())
      throw StructuralError("posterior spec: cube shape does not match grid");
  if (population.n_regions != grid.n_regions() || population.n_ages != grid.n_ages() ||
      population.n_years != grid.n_years())
    throw StructuralError("posterior spec: population shape does not match grid");
  for (const auto& row : programme) {
    if (grid.region_index(row.region) < 0)
      throw StructuralError("posterior spec: programme region '" + row.region + "' unknown");
    if (!grid.year_on_grid(row.year))
      throw StructuralError("posterior spec: programme year outside grid");
    if (row.age_lo < 0 || row.age_lo > row.age_hi || row.age_hi > grid.age_max)
      throw StructuralError("posterior spec: programme band outside grid");
  }
  spec.cube = std::move(cube);
  spec.programme = std::move(programme);
  spec.population = std::move(population);
  spec.hyper = hyper;
  return spec;
}

double survey_nll(const EventCountCube& cube, const CoverageField& coverage,
                  const HazardField& hazards, Diagnostics* diag) {
  if (!cube.counts[0].same_shape(coverage.survivor) ||
      !cube.counts[0].same_shape(hazards.tmic))
    throw StructuralError("survey_nll: cube and fields disagree on grid shape");

  const auto& n_tmic = cube.of(SurveyOutcome::Tmic).values;
  const auto& n_mmc = cube.of(SurveyOutcome::MmcNt).values;
  const auto& n_rc = cube.of(SurveyOutcome::RightCensored).values;
  const auto& n_lc = cube.of(SurveyOutcome::LeftCensored).values;

  double nll = 0.0;
  std::size_t clamped = 0;
  for (std::size_t c = 0; c < n_tmic.size(); ++c) {
    const double nt = n_tmic[c], nm = n_mmc[c], nr = n_rc[c], nl = n_lc[c];
    if (nt == 0.0 && nm == 0.0 && nr == 0.0 && nl == 0.0) continue;
    const double s = coverage.survivor.values[c];
    bool floor_hit = false;
    if (nt > 0.0) nll -= nt * (safe_log(s, &floor_hit) + safe_log(hazards.tmic.values[c], &floor_hit));
    if (nm > 0.0)
      nll -= nm * (safe_log(s, &floor_hit) + safe_log(hazards.mmc_nt.values[c], &floor_hit));
    if (nr > 0.0) nll -= nr * safe_log(s, &floor_hit);
    if (nl > 0.0) nll -= nl * safe_log(1.0 - s, &floor_hit);
    if (floor_hit) ++clamped;
  }
  if (diag && clamped > 0) {
    diag->clamped_likelihood_cells += clamped;
    diag->warn("survey_nll: " + std::to_string(clamped) +
               " cell(s) with positive count hit the probability floor");
  }
  return nll;
}

double programme_nll(const std::vector<ProgrammeCount>& counts, const std::vector<double>& mu,
                     Diagnostics* diag) {
  if (counts.size() != mu.size())
    throw StructuralError("programme_nll: counts and mu lengths differ");
  double nll = 0.0;
  std::size_t clamped = 0;
  for (std::size_t r = 0; r < counts.size(); ++r) {
    const double y = counts[r].count;
    bool floor_hit = false;
    nll += mu[r] - y * (y > 0.0 ? safe_log(mu[r], &floor_hit) : 0.0) + std::lgamma(y + 1.0);
    if (floor_hit) {
      ++clamped;
      if (diag)
        diag->warn("programme_nll: zero expected count against y=" +
                   std::to_string(y) + " at region " + counts[r].region + " year " +
                   std::to_string(counts[r].year));
    }
  }
  if (diag) diag->clamped_likelihood_cells += clamped;
  return nll;
}

namespace {

// All prior terms; adds the gradient into *grad when given.
double prior_impl(const Eigen::VectorXd& x, const PosteriorSpec& spec, Eigen::VectorXd* grad) {
  const ParameterLayout& L = spec.layout;
  const ModelStructure& st = spec.structure;
  const HyperPriors& hp = spec.hyper;
  const double kappa = spec.constraint_penalty;
  const int ni = st.n_regions();
  const int nj = st.n_basis();
  const int nt = st.n_years();

  double nlp = 0.0;
  const double* xs = x.data() + L.offset(ParamBlock::LogSigma);
  const double* xr = x.data() + L.offset(ParamBlock::LogitRho);
  auto gsig = [&](int slot) { return grad->data() + L.offset(ParamBlock::LogSigma) + slot; };
  auto grho = [&](int slot) { return grad->data() + L.offset(ParamBlock::LogitRho) + slot; };

  // intercepts
  for (ParamBlock b : {ParamBlock::AlphaTmic, ParamBlock::AlphaMmcPaed, ParamBlock::AlphaMmcAdult}) {
    const double v = x[L.offset(b)];
    nlp += 0.5 * (v / hp.intercept_sd) * (v / hp.intercept_sd) + std::log(hp.intercept_sd) +
           0.5 * kLog2Pi;
    if (grad) (*grad)[L.offset(b)] += v / (hp.intercept_sd * hp.intercept_sd);
  }

  // Exp(rate) on sigma, parameterized by s = log sigma
  for (int k = 0; k < kNumSigmas; ++k) {
    const double sig = std::exp(xs[k]);
    nlp += hp.sd_rate * sig - std::log(hp.sd_rate) - xs[k];
    if (grad) *gsig(k) += hp.sd_rate * sig - 1.0;
  }

  // N(mean, sd) on logit-scale autocorrelations
  for (int k = 0; k < kNumRhos; ++k) {
    const double z = (xr[k] - hp.rho_mean) / hp.rho_sd;
    nlp += 0.5 * z * z + std::log(hp.rho_sd) + 0.5 * kLog2Pi;
    if (grad) *grho(k) += z / hp.rho_sd;
  }

  // free logit-p entries
  for (int k = 0; k < L.n_free_shares; ++k) {
    const double v = x[L.offset(ParamBlock::LogitP) + k];
    const double mu = spec.shares.free_mu[k];
    const double sd = spec.shares.free_sigma[k];
    const double z = (v - mu) / sd;
    nlp += 0.5 * z * z + std::log(sd) + 0.5 * kLog2Pi;
    if (grad) (*grad)[L.offset(ParamBlock::LogitP) + k] += z / sd;
  }

  // Gaussian quadratic form bookkeeping shared by every random-effect
  // block: 0.5 tau q + r s - 0.5 logdet + 0.5 r log(2pi), with
  // tau = exp(-2s).
  auto add_gauss = [&](double q, int rank, double log_det, int sigma_slot) {
    const double s = xs[sigma_slot];
    const double tau = std::exp(-2.0 * s);
    nlp += 0.5 * tau * q + rank * s - 0.5 * log_det + 0.5 * rank * kLog2Pi;
    if (grad) *gsig(sigma_slot) += -tau * q + rank;
    return tau;
  };
  // rho enters both the quadratic form and the log determinant; the
  // chain factor is d rho / d logit = (1 - rho^2) / 2
  auto add_rho_grad = [&](int rho_slot, double rho, double tau, double q_drho,
                          double log_det_drho) {
    if (!grad) return;
    *grho(rho_slot) += (0.5 * tau * q_drho - 0.5 * log_det_drho) * (1.0 - rho * rho) / 2.0;
  };

  // spatial main effects: ICAR with isolated regions made proper
  for (auto [block, slot] :
       {std::pair{ParamBlock::PsiTmic, kSigmaPsiTmic},
        std::pair{ParamBlock::PsiMmcPaed, kSigmaPsiPaed},
        std::pair{ParamBlock::PsiMmcAdult, kSigmaPsiAdult}}) {
    const auto v = L.segment(x, block);
    const Eigen::VectorXd qv = st.space.q_effective * v;
    const double tau = add_gauss(v.dot(qv), st.space.rank, st.space.log_det_plus, slot);
    if (grad) L.segment(*grad, block) += tau * qv;
    for (const auto& group : st.space.constraint_groups) {
      double sum = 0.0;
      for (int i : group) sum += v[i];
      nlp += kappa * sum * sum;
      if (grad)
        for (int i : group) (*grad)[L.offset(block) + i] += 2.0 * kappa * sum;
    }
  }

  // age spline weights: AR1 over the weight index
  for (auto [block, slot, rho_slot] :
       {std::tuple{ParamBlock::PhiTmicW, kSigmaPhiTmic, kRhoPhiTmic},
        std::tuple{ParamBlock::PhiMmcPaedW, kSigmaPhiPaed, kRhoPhiPaed},
        std::tuple{ParamBlock::PhiMmcAdultW, kSigmaPhiAdult, kRhoPhiAdult}}) {
    const double rho = logit_rho_to_rho(xr[rho_slot]);
    const Eigen::MatrixXd qa = Eigen::MatrixXd(build_ar1_precision(nj, rho).matrix);
    const auto v = L.segment(x, block);
    const Eigen::VectorXd qv = qa * v;
    const double tau = add_gauss(v.dot(qv), nj, ar1_log_det(nj, rho), slot);
    if (grad) {
      L.segment(*grad, block) += tau * qv;
      const Eigen::MatrixXd dqa = ar1_precision_drho(nj, rho);
      add_rho_grad(rho_slot, rho, tau, v.dot(dqa * v), ar1_log_det_drho(nj, rho));
    }
  }

  // time main effect: AR1
  {
    const double rho = logit_rho_to_rho(xr[kRhoTheta]);
    const Eigen::MatrixXd qt = Eigen::MatrixXd(build_ar1_precision(nt, rho).matrix);
    const auto v = L.segment(x, ParamBlock::Theta);
    const Eigen::VectorXd qv = qt * v;
    const double tau = add_gauss(v.dot(qv), nt, ar1_log_det(nt, rho), kSigmaTheta);
    if (grad) {
      L.segment(*grad, ParamBlock::Theta) += tau * qv;
      const Eigen::MatrixXd dqt = ar1_precision_drho(nt, rho);
      add_rho_grad(kRhoTheta, rho, tau, v.dot(dqt * v), ar1_log_det_drho(nt, rho));
    }
  }

  // age-spline x space interactions: Qa(rho) (x) Q_space
  for (auto [block, slot, rho_slot] :
       {std::tuple{ParamBlock::GammaTmicW, kSigmaGammaTmic, kRhoGammaTmic},
        std::tuple{ParamBlock::GammaMmcPaedW, kSigmaGammaPaed, kRhoGammaPaed},
        std::tuple{ParamBlock::GammaMmcAdultW, kSigmaGammaAdult, kRhoGammaAdult}}) {
    const double rho = logit_rho_to_rho(xr[rho_slot]);
    const Eigen::MatrixXd qa = Eigen::MatrixXd(build_ar1_precision(nj, rho).matrix);
    Eigen::Map<const RowMat> w(x.data() + L.offset(block), nj, ni);
    const Eigen::MatrixXd qwb = qa * w * st.space.q_effective;
    const double q = (w.array() * qwb.array()).sum();
    const int rank = nj * st.space.rank;
    const double log_det = st.space.rank * ar1_log_det(nj, rho) + nj * st.space.log_det_plus;
    const double tau = add_gauss(q, rank, log_det, slot);
    if (grad) {
      Eigen::Map<RowMat>(grad->data() + L.offset(block), nj, ni) += tau * qwb;
      const Eigen::MatrixXd dqa = ar1_precision_drho(nj, rho);
      const double q_drho = (w.array() * (dqa * w * st.space.q_effective).array()).sum();
      add_rho_grad(rho_slot, rho, tau, q_drho, st.space.rank * ar1_log_det_drho(nj, rho));
    }
    for (const auto& group : st.space.constraint_groups)
      for (int j = 0; j < nj; ++j) {
        double sum = 0.0;
        for (int i : group) sum += w(j, i);
        nlp += kappa * sum * sum;
        if (grad)
          for (int i : group)
            (*grad)[L.offset(block) + j * ni + i] += 2.0 * kappa * sum;
      }
  }

  // age-spline x time interaction: Qa(rho_age) (x) Qt(rho_time)
  {
    const double rho_a = logit_rho_to_rho(xr[kRhoDeltaAge]);
    const double rho_t = logit_rho_to_rho(xr[kRhoDeltaTime]);
    const Eigen::MatrixXd qa = Eigen::MatrixXd(build_ar1_precision(nj, rho_a).matrix);
    const Eigen::MatrixXd qt = Eigen::MatrixXd(build_ar1_precision(nt, rho_t).matrix);
    Eigen::Map<const RowMat> w(x.data() + L.offset(ParamBlock::DeltaW), nj, nt);
    const Eigen::MatrixXd qwb = qa * w * qt;
    const double q = (w.array() * qwb.array()).sum();
    const double log_det = nt * ar1_log_det(nj, rho_a) + nj * ar1_log_det(nt, rho_t);
    const double tau = add_gauss(q, nj * nt, log_det, kSigmaDelta);
    if (grad) {
      Eigen::Map<RowMat>(grad->data() + L.offset(ParamBlock::DeltaW), nj, nt) += tau * qwb;
      const Eigen::MatrixXd dqa = ar1_precision_drho(nj, rho_a);
      const Eigen::MatrixXd dqt = ar1_precision_drho(nt, rho_t);
      add_rho_grad(kRhoDeltaAge, rho_a, tau, (w.array() * (dqa * w * qt).array()).sum(),
                   nt * ar1_log_det_drho(nj, rho_a));
      add_rho_grad(kRhoDeltaTime, rho_t, tau, (w.array() * (qa * w * dqt).array()).sum(),
                   nj * ar1_log_det_drho(nt, rho_t));
    }
  }

  // space x time interaction: Q_space (x) Qt(rho)
  {
    const double rho = logit_rho_to_rho(xr[kRhoZeta]);
    const Eigen::MatrixXd qt = Eigen::MatrixXd(build_ar1_precision(nt, rho).matrix);
    Eigen::Map<const RowMat> w(x.data() + L.offset(ParamBlock::Zeta), ni, nt);
    const Eigen::MatrixXd qwb = st.space.q_effective * w * qt;
    const double q = (w.array() * qwb.array()).sum();
    const int rank = st.space.rank * nt;
    const double log_det = nt * st.space.log_det_plus + st.space.rank * ar1_log_det(nt, rho);
    const double tau = add_gauss(q, rank, log_det, kSigmaZeta);
    if (grad) {
      Eigen::Map<RowMat>(grad->data() + L.offset(ParamBlock::Zeta), ni, nt) += tau * qwb;
      const Eigen::MatrixXd dqt = ar1_precision_drho(nt, rho);
      const double q_drho = (w.array() * (st.space.q_effective * w * dqt).array()).sum();
      add_rho_grad(kRhoZeta, rho, tau, q_drho, st.space.rank * ar1_log_det_drho(nt, rho));
    }
    for (const auto& group : st.space.constraint_groups)
      for (int t = 0; t < nt; ++t) {
        double sum = 0.0;
        for (int i : group) sum += w(i, t);
        nlp += kappa * sum * sum;
        if (grad)
          for (int i : group)
            (*grad)[L.offset(ParamBlock::Zeta) + i * nt + t] += 2.0 * kappa * sum;
      }
  }

  return nlp;
}

// Survey and programme terms; when grad is given, accumulates the data
// part of the gradient by reverse sweep through hazards and survivors.
struct DataEval {
  double survey = 0.0;
  double programme = 0.0;
};

DataEval data_nll_impl(const Eigen::VectorXd& x, const PosteriorSpec& spec,
                       Eigen::VectorXd* grad, Diagnostics* diag) {
  const ModelStructure& st = spec.structure;
  const ParameterLayout& L = spec.layout;
  const Grid& grid = st.grid;
  const int ni = st.n_regions(), na = st.n_ages(), nt = st.n_years(), nj = st.n_basis();
  const int cutoff = grid.paediatric_cutoff;

  const HazardField f = compute_hazards(x, L, st, spec.shares);
  const CoverageField cov = compute_survivor_and_cif(f, grid);

  DataEval out;
  out.survey = survey_nll(spec.cube, cov, f, diag);
  std::vector<double> mu;
  if (!spec.programme.empty()) {
    mu = expected_programme_counts(cov, f, spec.population, spec.programme, grid);
    out.programme = programme_nll(spec.programme, mu, diag);
  }
  if (!grad) return out;

  LexisField adj_tmic(ni, na, nt), adj_raw(ni, na, nt), adj_mmc_nt(ni, na, nt),
      adj_mmc_t(ni, na, nt), adj_uc(ni, na, nt), adj_s(ni, na, nt);
  Eigen::MatrixXd adj_p = Eigen::MatrixXd::Zero(ni, nt);

  // survey term adjoints
  const auto& n_tmic = spec.cube.of(SurveyOutcome::Tmic).values;
  const auto& n_mmc = spec.cube.of(SurveyOutcome::MmcNt).values;
  const auto& n_rc = spec.cube.of(SurveyOutcome::RightCensored).values;
  const auto& n_lc = spec.cube.of(SurveyOutcome::LeftCensored).values;
  for (std::size_t c = 0; c < n_tmic.size(); ++c) {
    const double ntc = n_tmic[c], nm = n_mmc[c], nr = n_rc[c], nl = n_lc[c];
    if (ntc == 0.0 && nm == 0.0 && nr == 0.0 && nl == 0.0) continue;
    const double s = cov.survivor.values[c];
    if (s > kEps) adj_s.values[c] -= (ntc + nm + nr) / s;
    if (1.0 - s > kEps) adj_s.values[c] += nl / (1.0 - s);
    if (ntc > 0.0 && f.tmic.values[c] > kEps) adj_tmic.values[c] -= ntc / f.tmic.values[c];
    if (nm > 0.0 && f.mmc_nt.values[c] > kEps) adj_mmc_nt.values[c] -= nm / f.mmc_nt.values[c];
  }

  // programme term adjoints
  for (std::size_t r = 0; r < spec.programme.size(); ++r) {
    const auto& row = spec.programme[r];
    const int i = grid.region_index(row.region);
    const int t = grid.year_index(row.year);
    const double w = 1.0 - (mu[r] > kEps ? row.count / mu[r] : 0.0);
    for (int a = row.age_lo; a <= row.age_hi; ++a) {
      const double pop = spec.population.at(i, a, t);
      if (pop == 0.0) continue;
      const double s = cov.survivor.at(i, a, t);
      adj_s.at(i, a, t) += w * pop * (f.mmc_nt.at(i, a, t) + f.mmc_t.at(i, a, t));
      adj_mmc_nt.at(i, a, t) += w * pop * s;
      adj_mmc_t.at(i, a, t) += w * pop * s;
    }
  }

  // survivor chain: S[a+1] = S[a] * uc[a] along each cohort diagonal
  for (int i = 0; i < ni; ++i)
    for (int b = -(na - 1); b < nt; ++b) {
      const int a_first = std::max(0, -b);
      int a_last = std::min(na - 1, nt - 1 - b);
      if (a_last < a_first) continue;
      double carry = 0.0;
      for (int a = a_last; a > a_first; --a) {
        const double g = adj_s.at(i, a, b + a) + carry;
        adj_uc.at(i, a - 1, b + a - 1) += g * cov.survivor.at(i, a - 1, b + a - 1);
        carry = g * f.uc.at(i, a - 1, b + a - 1);
      }
    }

  // hazards to predictors
  Eigen::MatrixXd acc_tmic = Eigen::MatrixXd::Zero(na, ni);   // d eta_tmic, summed over t
  Eigen::MatrixXd acc_paed = Eigen::MatrixXd::Zero(na, ni);   // paediatric eta
  Eigen::MatrixXd sum_ai = Eigen::MatrixXd::Zero(na, ni);     // adult eta, summed over t
  Eigen::MatrixXd colsum_at = Eigen::MatrixXd::Zero(na, nt);  // adult eta, summed over i
  double g_alpha_adult = 0.0;
  Eigen::VectorXd g_psi_adult = Eigen::VectorXd::Zero(ni);
  Eigen::VectorXd g_theta = Eigen::VectorXd::Zero(nt);
  Eigen::MatrixXd g_zeta = Eigen::MatrixXd::Zero(ni, nt);

  for (int i = 0; i < ni; ++i)
    for (int a = 0; a < na && a <= st.terminal_age; ++a)
      for (int t = 0; t < nt; ++t) {
        const double lam_t = f.tmic.at(i, a, t);
        const double lam_r = f.mmc_raw.at(i, a, t);
        const double p = lam_t > 0.0 ? f.mmc_t.at(i, a, t) / lam_t : 0.0;

        double d_tmic = adj_tmic.at(i, a, t);
        double d_raw = adj_raw.at(i, a, t);
        const double d_nt = adj_mmc_nt.at(i, a, t);
        const double d_mt = adj_mmc_t.at(i, a, t);
        const double d_uc = adj_uc.at(i, a, t);
        d_raw += d_nt * (1.0 - lam_t) - d_uc * (1.0 - lam_t);
        d_tmic += -d_nt * lam_r + d_mt * p - d_uc * (1.0 - lam_r);
        adj_p(i, t) += d_mt * lam_t;

        acc_tmic(a, i) += d_tmic * lam_t * (1.0 - lam_t);
        const double d_eta = d_raw * lam_r * (1.0 - lam_r);
        if (a < cutoff) {
          acc_paed(a, i) += d_eta;
        } else {
          sum_ai(a, i) += d_eta;
          colsum_at(a, t) += d_eta;
          g_alpha_adult += d_eta;
          g_psi_adult[i] += d_eta;
          g_theta[t] += d_eta;
          g_zeta(i, t) += d_eta;
        }
      }

  // predictors to parameters
  const Eigen::MatrixXd& W = st.basis.design;
  auto scatter_static = [&](const Eigen::MatrixXd& acc, ParamBlock alpha, ParamBlock psi,
                            ParamBlock phi_w, ParamBlock gamma_w) {
    (*grad)[L.offset(alpha)] += acc.sum();
    L.segment(*grad, psi) += acc.colwise().sum().transpose();
    L.segment(*grad, phi_w) += W.transpose() * acc.rowwise().sum();
    Eigen::Map<RowMat>(grad->data() + L.offset(gamma_w), nj, ni) += W.transpose() * acc;
  };
  scatter_static(acc_tmic, ParamBlock::AlphaTmic, ParamBlock::PsiTmic, ParamBlock::PhiTmicW,
                 ParamBlock::GammaTmicW);
  scatter_static(acc_paed, ParamBlock::AlphaMmcPaed, ParamBlock::PsiMmcPaed,
                 ParamBlock::PhiMmcPaedW, ParamBlock::GammaMmcPaedW);

  (*grad)[L.offset(ParamBlock::AlphaMmcAdult)] += g_alpha_adult;
  L.segment(*grad, ParamBlock::PsiMmcAdult) += g_psi_adult;
  L.segment(*grad, ParamBlock::PhiMmcAdultW) += W.transpose() * sum_ai.rowwise().sum();
  Eigen::Map<RowMat>(grad->data() + L.offset(ParamBlock::GammaMmcAdultW), nj, ni) +=
      W.transpose() * sum_ai;
  L.segment(*grad, ParamBlock::Theta) += g_theta;
  Eigen::Map<RowMat>(grad->data() + L.offset(ParamBlock::DeltaW), nj, nt) +=
      W.transpose() * colsum_at;
  Eigen::Map<RowMat>(grad->data() + L.offset(ParamBlock::Zeta), ni, nt) += g_zeta;

  for (int i = 0; i < ni; ++i)
    for (int t = 0; t < nt; ++t) {
      const auto& cell = spec.shares.at(i, t);
      if (cell.free_index < 0) continue;
      const double lp = x[L.offset(ParamBlock::LogitP) + cell.free_index];
      const double p = 1.0 / (1.0 + std::exp(-lp));
      (*grad)[L.offset(ParamBlock::LogitP) + cell.free_index] += adj_p(i, t) * p * (1.0 - p);
    }

  return out;
}

}  // namespace

double prior_nlp(const Eigen::VectorXd& params, const PosteriorSpec& spec) {
  if (params.size() != spec.layout.dim)
    throw StructuralError("prior_nlp: parameter vector does not match layout");
  return prior_impl(params, spec, nullptr);
}

double prior_nlp_grad(const Eigen::VectorXd& params, const PosteriorSpec& spec,
                      Eigen::VectorXd& grad) {
  if (params.size() != spec.layout.dim)
    throw StructuralError("prior_nlp: parameter vector does not match layout");
  grad = Eigen::VectorXd::Zero(spec.layout.dim);
  return prior_impl(params, spec, &grad);
}

NllBreakdown total_nlp_breakdown(const Eigen::VectorXd& params, const PosteriorSpec& spec,
                                 Diagnostics* diag) {
  NllBreakdown b;
  auto data = data_nll_impl(params, spec, nullptr, diag);
  b.survey = data.survey;
  b.programme = data.programme;
  b.prior = prior_impl(params, spec, nullptr);
  b.total = b.survey + b.programme + b.prior;
  return b;
}

double total_nlp(const Eigen::VectorXd& params, const PosteriorSpec& spec, Diagnostics* diag) {
  return total_nlp_breakdown(params, spec, diag).total;
}

double total_nlp_grad(const Eigen::VectorXd& params, const PosteriorSpec& spec,
                      Eigen::VectorXd& grad, Diagnostics* diag) {
  grad = Eigen::VectorXd::Zero(spec.layout.dim);
  auto data = data_nll_impl(params, spec, &grad, diag);
  const double prior = prior_impl(params, spec, &grad);
  return data.survey + data.programme + prior;
}

}  // namespace mccov
