// Acceptance report: one PASS/FAIL line per criterion. Runs the pipelines
// through the harness (so every number here also exists as an artifact with a
// manifest) and finishes by rerunning every manifest.
//
//   acceptance [--out DIR] [--allow-fail 2,4,12]
//
// Exit status is the number of failing criteria not listed in --allow-fail.

#include "bifcurrent/harness.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

using namespace bifcurrent;
namespace fs = std::filesystem;
using C = std::complex<double>;

namespace {

using Table = std::vector<std::map<std::string, std::string>>;

Table read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("missing " + p.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> head;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) head.push_back(c);
  }
  Table t;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string c;
    std::map<std::string, std::string> row;
    for (std::size_t k = 0; std::getline(ss, c, ','); ++k) row[head.at(k)] = c;
    t.push_back(row);
  }
  return t;
}

std::map<std::string, double> read_kv(const fs::path& p) {
  std::map<std::string, double> m;
  for (auto& r : read_csv(p)) m[r["key"]] = std::stod(r["value"]);
  return m;
}

std::map<std::string, std::pair<double, double>> read_estimates(const fs::path& p) {
  std::map<std::string, std::pair<double, double>> m;
  for (auto& r : read_csv(p)) m[r["method"]] = {std::stod(r["value"]), std::stod(r["stderr"])};
  return m;
}

double num(const std::map<std::string, std::string>& row, const std::string& k) { return std::stod(row.at(k)); }

struct Report {
  std::set<int> allowed;
  int unexpected = 0;
  void line(int k, bool pass, const std::string& what) {
    std::cout << "criterion " << std::setw(2) << k << ": " << (pass ? "PASS" : "FAIL") << "  " << what
              << (!pass && allowed.count(k) ? "  [known]" : "") << std::endl;
    if (!pass && !allowed.count(k)) ++unexpected;
  }
};

std::string f4(double v) {
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance report"};
  std::string out_root = "acceptance_out";
  std::vector<int> allow;
  app.add_option("--out", out_root);
  app.add_option("--allow-fail", allow)->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  Report rep;
  rep.allowed.insert(allow.begin(), allow.end());
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path root(out_root);
  std::vector<fs::path> manifests;

  auto run = [&](ExperimentConfig c, const std::string& dir) {
    c.output_dir = root / dir;
    const auto m = run_experiment(c);
    if (!m.ok) throw std::runtime_error(dir + ": " + m.error.dump());
    manifests.push_back(c.output_dir / "manifest.json");
    return c.output_dir;
  };

  const C mu0(0.5, 2.2);
  ExperimentConfig base;
  base.master_seed = 1;

  try {
    // Lyapunov estimators, canonical and one Maskit parameter
    ExperimentConfig ly = base;
    ly.pipeline = "lyapunov";
    ly.estimator.methods = {"brown", "geodesic", "lattice_norm", "lattice_trace", "mu"};
    ly.estimator.paths.t_max = 40;
    ly.estimator.paths.n_paths = 400;
    ly.estimator.paths.brownian.dt = 5e-3;
    const auto can = read_estimates(run(ly, "lyapunov_can") / "lyapunov.csv");
    ly.representation.kind = "maskit";
    ly.representation.lambda = mu0;
    const auto msk = read_estimates(run(ly, "lyapunov_maskit") / "lyapunov.csv");

    const double cb = can.at("brown").first;
    rep.line(1, std::abs(cb - 0.5) <= 0.05, "chi_brown(can) = " + f4(cb) + " +- " + f4(can.at("brown").second));

    ExperimentConfig br = base;
    br.pipeline = "brownian";
    auto bs = read_kv(run(br, "brownian") / "brownian_summary.csv");
    rep.line(2, bs["drift"] >= 0.95 && bs["drift"] <= 1.05, "drift d(i, w(40))/40 = " + f4(bs["drift"]));
    rep.line(3, std::abs(bs["heat_slope"] - 1) <= 0.15,
             "heat kernel slope at t = 20: " + f4(bs["heat_slope"]) + " (r2 " + f4(bs["heat_r2"]) + ")");

    ExperimentConfig en = base;
    en.pipeline = "enumerate";
    const fs::path ed = run(en, "enumerate");
    std::map<double, double> margulis;
    for (auto& r : read_csv(ed / "ball.csv")) margulis[num(r, "radius")] = num(r, "margulis_ratio");
    const double m10 = margulis.at(10);
    rep.line(4, m10 >= 0.6 && m10 <= 1.4 && std::abs(margulis.at(12) - 1) < std::abs(margulis.at(8) - 1),
             "|B(r)| 2pi/e^r = " + f4(margulis.at(8)) + ", " + f4(m10) + ", " + f4(margulis.at(12)) +
                 " at r = 8, 10, 12");
    const auto geo = read_csv(ed / "geodesics.csv").at(0);
    const double pr = num(geo, "prime_ratio");
    rep.line(5, pr >= 0.5 && pr <= 1.5, "|CG_10| 10/e^10 = " + f4(pr) + " (" + geo.at("count") + " classes)");

    ExperimentConfig ds = base;
    ds.pipeline = "discretize";
    ds.fls.n_chains = 25;
    ds.fls.n_steps = 400;
    auto fl = read_kv(run(ds, "discretize") / "discretize_summary.csv");
    rep.line(6,
             fl["acceptances"] >= 10000 && fl["exit_angle_chi2_p"] >= 0.01 &&
                 std::abs(fl["acceptance_rate"] - fl["p"]) <= 0.02 && fl["tail_slope"] < 0 && fl["tail_r2"] >= 0.95,
             f4(fl["acceptances"]) + " acceptances, chi2 p = " + f4(fl["exit_angle_chi2_p"]) + ", rate " +
                 f4(fl["acceptance_rate"]) + " (p = " + f4(fl["p"]) + "), tail slope " + f4(fl["tail_slope"]) +
                 " r2 " + f4(fl["tail_r2"]));

    auto identity = [](auto& e) { return e.at("mu").first / (e.at("tau").first * e.at("brown").first) - 1; };
    const double i1 = identity(can), i2 = identity(msk);
    rep.line(7, std::abs(i1) <= 0.1 && std::abs(i2) <= 0.1,
             "chi_mu / (tau chi_brown) - 1 = " + f4(i1) + " (can), " + f4(i2) + " (maskit 0.5+2.2i)");

    auto pairwise = [](const std::map<std::string, std::pair<double, double>>& e, std::string& msg) {
      const std::vector<std::string> names{"brown", "geodesic", "lattice_norm", "lattice_trace"};
      double worst = 0;
      for (std::size_t a = 0; a < names.size(); ++a)
        for (std::size_t b = a + 1; b < names.size(); ++b) {
          const auto [va, sa] = e.at(names[a]);
          const auto [vb, sb] = e.at(names[b]);
          worst = std::max(worst, std::abs(va - vb) / std::hypot(sa, sb));
        }
      msg += "[";
      for (const auto& n : names) msg += n + " " + f4(e.at(n).first) + " ";
      msg += "worst " + f4(worst) + " sd] ";
      return worst <= 2;
    };
    std::string msg8;
    const bool p8 = pairwise(can, msg8) & pairwise(msk, msg8);
    rep.line(8, p8, "can " + msg8.substr(0, msg8.find("] ") + 1) + " maskit " + msg8.substr(msg8.find("] ") + 2));

    ExperimentConfig ce = base;
    ce.pipeline = "census";
    bool p9 = true;
    std::string msg9;
    for (int k = 0; k < 2; ++k) {
      if (k == 1) {
        ce.representation.kind = "maskit";
        ce.representation.lambda = mu0;
        ce.census.chi_ref = msk.at("lattice_trace").first;
      }
      const fs::path cd = run(ce, k ? "census_maskit" : "census_can");
      const auto fit = read_kv(cd / "census_fit.csv");
      p9 = p9 && fit.at("strictly_decreasing") == 1 && fit.at("slope") < 0 && fit.at("r2") >= 0.9;
      msg9 += std::string(k ? "maskit" : "can") + " fractions";
      for (auto& r : read_csv(cd / "census.csv")) msg9 += " " + f4(num(r, "bad_fraction"));
      msg9 += " slope " + f4(fit.at("slope")) + " r2 " + f4(fit.at("r2")) + (k ? "" : "; ");
    }
    rep.line(9, p9, msg9);

    {
      // dd^c anchors on a 201 x 201 grid of [-2, 2]^2
      GridSpec g{{-2, 2, -2, 2}, 201, 201};
      const auto harm = ddc_of(sample_field(g, [](C z) { return std::real(z * z * z) - 3 * std::imag(z); }),
                               g.hx(), g.hy());
      const double harm_max = harm.array().isFinite().select(harm.cwiseAbs(), 0.0).maxCoeff();
      const double mass = total_mass(
          ddc_of(sample_field(g, [](C z) { return std::max(std::log(std::abs(z)), 0.0); }), g.hx(), g.hy()));
      const auto sq = ddc_of(sample_field(g, [](C z) { return std::norm(z); }), g.hx(), g.hy());
      // dd^c |z|^2 = (2 / pi) dA
      const double dens = 2 / std::numbers::pi * g.hx() * g.hy();
      const double sq_dev = sq.array().isFinite().select((sq.array() - dens).abs(), 0.0).maxCoeff();
      rep.line(10, harm_max <= 1e-6 && std::abs(mass - 1) <= 0.05 && sq_dev <= 1e-6,
               "harmonic max " + f4(harm_max) + ", max(log|z|, 0) mass " + f4(mass) + ", |z|^2 density dev " +
                   f4(sq_dev));
    }

    ExperimentConfig dv = base;
    dv.pipeline = "divisor";
    const auto dsum = read_csv(run(dv, "divisor") / "divisor_summary.csv");
    int within = 0, words = 0;
    double div_total = 0, ddc_total = 0;
    for (auto& r : dsum) {
      if (r.at("word") == "TOTAL") {
        div_total = num(r, "divisor_mass");
        ddc_total = num(r, "ddc_mass");
        continue;
      }
      ++words;
      const double d = num(r, "divisor_mass"), m = num(r, "ddc_mass");
      // a word with no zeros is measured against the weight of one zero
      if (std::abs(d - m) <= 0.1 * std::max(d, 1 / (2 * num(r, "normalizer")))) ++within;
    }
    rep.line(11, words == 20 && within == 20 && std::abs(ddc_total - div_total) <= 0.1 * div_total,
             std::to_string(within) + "/" + std::to_string(words) + " words within 10%, total divisor " +
                 f4(div_total) + " ddc " + f4(ddc_total));

    ExperimentConfig eq = base;
    eq.pipeline = "equidist";
    const auto es = read_csv(run(eq, "equidist") / "equidist.csv");
    const double l_first = num(es.front(), "l1"), l_last = num(es.back(), "l1");
    std::string msg12 = "L1 at r = 8, 10, 12:";
    for (auto& r : es) msg12 += " " + f4(num(r, "l1"));
    rep.line(12, l_last <= 0.5 * l_first, msg12 + " (ratio " + f4(l_last / l_first) + ", need <= 0.5)");

    const double defect = max_constraint_defect(maskit_family(), GridSpec{});
    rep.line(13, defect <= 1e-9, "max |tr^2 [X,Y] - 4| on the 41 x 41 grid = " + f4(defect));

    std::vector<std::string> bad;
    for (const auto& mf : manifests) {
      const auto r = rerun(mf, mf.parent_path().string() + "_rerun");
      if (!r.identical) bad.push_back(mf.parent_path().filename().string());
    }
    std::string msg14 = std::to_string(manifests.size() - bad.size()) + "/" + std::to_string(manifests.size()) +
                        " pipeline reruns bit-identical";
    for (const auto& b : bad) msg14 += " " + b;
    rep.line(14, bad.empty(), msg14);
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 100;
  }
  std::cout << "elapsed " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s"
            << std::endl;
  return rep.unexpected;
}
