#include "wavecascade/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "wavecascade/expression.hpp"
#include "wavecascade/modal.hpp"
#include "wavecascade/spectral.hpp"
#include "wavecascade/verification.hpp"

namespace wavecascade {

// ---- config parsing --------------------------------------------------------

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool parse_number(const std::string& text, double& v) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* b = t.data();
  const char* e = b + t.size();
  if (*b == '+') ++b;
  const auto [ptr, ec] = std::from_chars(b, e, v);
  return ec == std::errc() && ptr == e && std::isfinite(v);
}

// "−2", "-1.5+2i", "3e-1-0.5i".
bool parse_complex(const std::string& text, cplx& z) {
  std::string t = trim(text);
  double re = 0.0;
  if (parse_number(t, re)) {
    z = re;
    return true;
  }
  if (t.size() < 2 || t.back() != 'i') return false;
  t.pop_back();
  for (std::size_t k = t.size(); k-- > 1;) {
    if ((t[k] == '+' || t[k] == '-') && t[k - 1] != 'e' && t[k - 1] != 'E') {
      double im = 0.0;
      std::string im_text = t.substr(k);
      if (im_text == "+" || im_text == "-") im_text += "1";
      if (!parse_number(t.substr(0, k), re) || !parse_number(im_text, im)) return false;
      z = {re, im};
      return true;
    }
  }
  return false;
}

class IniReader {
 public:
  IniReader(std::istream& in, std::string source) : source_(std::move(source)) {
    try {
      pt::read_ini(in, root_);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError(source_ + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
  }

  std::optional<std::string> raw(const std::string& sec, const std::string& key) {
    known_[sec].insert(key);
    const auto child = root_.get_child_optional(pt::ptree::path_type(sec, '\0'));
    if (!child) return std::nullopt;
    const auto v = child->get_child_optional(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return trim(v->data());
  }

  [[noreturn]] void fail(const std::string& sec, const std::string& key, const std::string& why) const {
    throw ConfigError(source_ + ": [" + sec + "] " + key + ": " + why);
  }

  void real(const std::string& sec, const std::string& key, double& out) {
    if (auto s = raw(sec, key)) {
      if (!parse_number(*s, out)) fail(sec, key, "expected a decimal number, got '" + *s + "'");
    }
  }

  void real(const std::string& sec, const std::string& key, std::optional<double>& out) {
    if (auto s = raw(sec, key)) {
      double v = 0.0;
      if (!parse_number(*s, v)) fail(sec, key, "expected a decimal number, got '" + *s + "'");
      out = v;
    }
  }

  void integer(const std::string& sec, const std::string& key, int& out) {
    if (auto s = raw(sec, key)) {
      const char* b = s->data();
      const auto [ptr, ec] = std::from_chars(b, b + s->size(), out);
      if (ec != std::errc() || ptr != b + s->size()) fail(sec, key, "expected an integer, got '" + *s + "'");
    }
  }

  void boolean(const std::string& sec, const std::string& key, bool& out) {
    if (auto s = raw(sec, key)) {
      const std::string v = lower(*s);
      if (v == "true" || v == "yes" || v == "1") out = true;
      else if (v == "false" || v == "no" || v == "0") out = false;
      else fail(sec, key, "expected true or false, got '" + *s + "'");
    }
  }

  void text(const std::string& sec, const std::string& key, std::string& out) {
    if (auto s = raw(sec, key)) out = *s;
  }

  std::vector<double> reals(const std::string& sec, const std::string& key) {
    std::vector<double> out;
    if (auto s = raw(sec, key)) {
      for (const auto& tok : split_list(*s)) {
        double v = 0.0;
        if (!parse_number(tok, v)) fail(sec, key, "bad number '" + tok + "' in list");
        out.push_back(v);
      }
    }
    return out;
  }

  std::vector<cplx> complexes(const std::string& sec, const std::string& key) {
    std::vector<cplx> out;
    if (auto s = raw(sec, key)) {
      for (const auto& tok : split_list(*s)) {
        cplx z;
        if (!parse_complex(tok, z)) fail(sec, key, "bad complex number '" + tok + "' in list");
        out.push_back(z);
      }
    }
    return out;
  }

  /// Rejects every section and key that no reader asked for.
  void reject_unknown() const {
    for (const auto& [sec, tree] : root_) {
      const auto it = known_.find(sec);
      if (it == known_.end()) {
        if (tree.empty()) throw ConfigError(source_ + ": key '" + sec + "' outside any section");
        throw ConfigError(source_ + ": unknown section [" + sec + "]");
      }
      for (const auto& [key, _] : tree) {
        if (!it->second.count(key)) throw ConfigError(source_ + ": [" + sec + "] unknown key '" + key + "'");
      }
    }
  }

 private:
  std::string source_;
  pt::ptree root_;
  std::map<std::string, std::set<std::string>> known_;
};

BetaProfile read_beta(IniReader& ini, double L) {
  std::string kind = "constant";
  ini.text("plant", "beta", kind);
  kind = lower(kind);
  double beta0 = 0.0, a = 0.0, b = L;
  ini.real("plant", "beta0", beta0);
  ini.real("plant", "beta_a", a);
  ini.real("plant", "beta_b", b);
  const std::vector<double> coeffs = ini.reals("plant", "beta_coeffs");
  const std::vector<double> values = ini.reals("plant", "beta_values");
  if (kind == "constant") return BetaProfile::constant(beta0);
  if (kind == "indicator") return BetaProfile::indicator(beta0, a, b);
  if (kind == "polynomial") {
    if (coeffs.empty()) ini.fail("plant", "beta_coeffs", "required for a polynomial profile");
    return BetaProfile::polynomial(coeffs);
  }
  if (kind == "tabulated") {
    if (values.size() < 2) ini.fail("plant", "beta_values", "needs at least two samples on a uniform grid");
    return BetaProfile::tabulated_uniform(L, values);
  }
  ini.fail("plant", "beta", "expected constant, indicator, polynomial or tabulated, got '" + kind + "'");
}

MeasurementSpec read_measurement(IniReader& ini, double L) {
  std::string kind = "dirichlet";
  ini.text("measurement", "kind", kind);
  kind = lower(kind);
  double xi = 0.0;
  const bool has_xi = ini.raw("measurement", "xi").has_value();
  ini.real("measurement", "xi", xi);
  std::string weight;
  ini.text("measurement", "weight", weight);
  if (kind == "dirichlet" || kind == "neumann") {
    if (!has_xi) ini.fail("measurement", "xi", "required for a pointwise sensor");
    return kind == "dirichlet" ? MeasurementSpec::dirichlet(xi) : MeasurementSpec::neumann(xi);
  }
  if (kind == "distributed") {
    if (weight.empty()) ini.fail("measurement", "weight", "required for a distributed sensor");
    const Expression w = Expression::parse(weight, {{"L", L}});
    return MeasurementSpec::distributed(w, weight);
  }
  ini.fail("measurement", "kind", "expected dirichlet, neumann or distributed, got '" + kind + "'");
}

CertificateParams read_certificate(IniReader& ini) {
  CertificateParams p{CertificateParams::Mode::BoundedReal};
  std::string mode = "bounded_real";
  ini.text("synthesis", "certificate", mode);
  mode = lower(mode);
  if (mode == "bounded_real" || mode == "bounded-real") p.mode = CertificateParams::Mode::BoundedReal;
  else if (mode == "auto") p.mode = CertificateParams::Mode::Auto;
  else if (mode == "manual") p.mode = CertificateParams::Mode::Manual;
  else ini.fail("synthesis", "certificate", "expected bounded_real, auto or manual, got '" + mode + "'");
  ini.real("synthesis", "epsilon", p.epsilon);
  ini.real("synthesis", "eta1", p.eta1);
  ini.real("synthesis", "eta2", p.eta2);
  ini.integer("synthesis", "epsilon_samples", p.epsilon_samples);
  if (p.mode == CertificateParams::Mode::Manual && !(p.epsilon > 0 && p.eta1 > 0 && p.eta2 > 0)) {
    ini.fail("synthesis", "certificate", "manual mode needs positive epsilon, eta1 and eta2");
  }
  return p;
}

void read_simulation(IniReader& ini, RunConfig& rc) {
  SimConfig& s = rc.sim;
  ini.integer("simulation", "Np", s.Np);
  ini.integer("simulation", "Mp", s.Mp);
  ini.integer("simulation", "N", s.N);
  ini.integer("simulation", "M", s.M);
  ini.real("simulation", "T", s.T);
  ini.real("simulation", "dt", s.dt);
  ini.integer("simulation", "save_stride", s.save_stride);
  ini.real("simulation", "stiffness_limit", s.stiffness_limit);
  ini.boolean("simulation", "open_loop", s.open_loop);
  std::string integ = "auto";
  ini.text("simulation", "integrator", integ);
  integ = lower(integ);
  if (integ == "auto") s.integrator = SimConfig::Integrator::Auto;
  else if (integ == "rk4") s.integrator = SimConfig::Integrator::RK4;
  else if (integ == "splitting") s.integrator = SimConfig::Integrator::Splitting;
  else ini.fail("simulation", "integrator", "expected auto, rk4 or splitting, got '" + integ + "'");
  ini.text("simulation", "y0", rc.y0);
  ini.text("simulation", "z0", rc.z0);
  ini.text("simulation", "z1", rc.z1);
  ini.text("simulation", "dz0", rc.dz0);
  ini.real("simulation", "v0", s.ic.v0);
  std::string obs = "zero";
  ini.text("simulation", "observer", obs);
  obs = lower(obs);
  if (obs == "zero") s.ic.observer = InitialCondition::ObserverInit::Zero;
  else if (obs == "exact") s.ic.observer = InitialCondition::ObserverInit::Exact;
  else ini.fail("simulation", "observer", "expected zero or exact, got '" + obs + "'");
  ini.real("simulation", "fit_t1", rc.fit_t1);
  ini.real("simulation", "fit_t2", rc.fit_t2);
  ini.integer("simulation", "snapshot_points", rc.snapshot_points);
  if (rc.snapshot_points < 2) ini.fail("simulation", "snapshot_points", "must be at least 2");

  const std::map<std::string, double> consts = {{"L", rc.plant.L}};
  auto fn = [&](const std::string& key, const std::string& text) {
    try {
      return std::function<double(double)>(Expression::parse(text, consts));
    } catch (const ConfigError& e) {
      ini.fail("simulation", key, e.what());
    }
  };
  s.ic.y0 = fn("y0", rc.y0);
  s.ic.z0 = fn("z0", rc.z0);
  s.ic.z1 = fn("z1", rc.z1);
  if (!rc.dz0.empty()) s.ic.dz0 = fn("dz0", rc.dz0);
  s.N0 = rc.N0;
}

}  // namespace

RunConfig parse_run_config(std::istream& in, const std::string& source) {
  IniReader ini(in, source);
  RunConfig rc;
  PlantConfig& p = rc.plant;
  ini.real("plant", "L", p.L);
  ini.real("plant", "c", p.c);
  ini.real("plant", "alpha", p.alpha);
  ini.real("plant", "delta", p.delta);
  p.beta = read_beta(ini, p.L);
  rc.measurement = read_measurement(ini, p.L);

  ini.integer("synthesis", "N0", rc.N0);
  rc.K_targets = ini.complexes("synthesis", "K_targets");
  rc.L_targets = ini.complexes("synthesis", "L_targets");
  ini.integer("synthesis", "N_max", rc.N_max);
  ini.integer("synthesis", "M_max", rc.M_max);
  ini.integer("synthesis", "tail_cutoff", rc.tail_cutoff);
  rc.certificate = read_certificate(ini);

  read_simulation(ini, rc);

  std::string dir;
  ini.text("output", "directory", dir);
  if (!dir.empty()) rc.output_dir = dir;
  if (auto f = ini.raw("output", "formats")) {
    rc.write_csv = rc.write_json = false;
    for (const auto& tok : split_list(lower(*f))) {
      if (tok == "csv") rc.write_csv = true;
      else if (tok == "json") rc.write_json = true;
      else ini.fail("output", "formats", "unknown format '" + tok + "'");
    }
  }
  ini.reject_unknown();

  if (rc.N0 < 1) throw ConfigError(source + ": [synthesis] N0 must be at least 1");
  if (!rc.K_targets.empty() && static_cast<int>(rc.K_targets.size()) != rc.N0 + 1) {
    throw ConfigError(source + ": [synthesis] K_targets needs N0 + 1 entries");
  }
  if (!rc.L_targets.empty() && static_cast<int>(rc.L_targets.size()) != rc.N0) {
    throw ConfigError(source + ": [synthesis] L_targets needs N0 entries");
  }
  require_valid(rc.plant);
  rc.measurement.validate(rc.plant);
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_run_config(in, path.string());
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& body) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + tmp.string());
    body(os);
    os.flush();
    if (!os) throw ConfigError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---- commands --------------------------------------------------------------

namespace {

class CertificateExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Context {
  RunConfig cfg;
  std::filesystem::path out_dir;
  std::ostream& out;
  std::ostream& err;

  std::filesystem::path file(const std::string& name) const { return out_dir / name; }
  void announce(const std::filesystem::path& p) const { out << "wrote " << p.string() << '\n'; }
};

void write_json(const Context& cx, const std::string& name, const nlohmann::json& j) {
  if (!cx.cfg.write_json) return;
  const auto p = cx.file(name);
  write_file_atomic(p, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  cx.announce(p);
}

void write_csv(const Context& cx, const std::string& name, const std::function<void(std::ostream&)>& body) {
  if (!cx.cfg.write_csv) return;
  const auto p = cx.file(name);
  write_file_atomic(p, body);
  cx.announce(p);
}

void put_cplx(std::ostream& os, cplx z) { os << ',' << z.real() << ',' << z.imag(); }

int cmd_spectrum(const Context& cx, int n_max, int m_max) {
  if (n_max < 1 || m_max < 0) throw UsageError("spectrum needs --n-max >= 1 and --m-max >= 0");
  const RunConfig& rc = cx.cfg;
  const ModalCatalog cat(rc.plant, rc.measurement, n_max, m_max);
  auto table = [&](std::ostream& os) {
    os << std::setprecision(17);
    os << "family,k,lambda_re,lambda_im,gamma,a_re,a_im,b_re,b_im,c_re,c_im,normalization_re,"
          "normalization_im\n";
    auto row = [&](const ModalData& d, const std::string& gamma) {
      os << (d.index.is_parabolic() ? "parabolic" : "hyperbolic") << ',' << d.index.k;
      put_cplx(os, d.lambda);
      os << ',' << gamma;
      put_cplx(os, d.a);
      put_cplx(os, d.b);
      put_cplx(os, d.c);
      put_cplx(os, d.pair.normalization);
      os << '\n';
    };
    for (int n = 1; n <= n_max; ++n) {
      std::ostringstream g;
      g << std::setprecision(17) << cat.gamma(n).value;
      row(cat.parabolic(n), g.str());
    }
    for (int m = -m_max; m <= m_max; ++m) row(cat.hyperbolic(m), "");
  };
  table(cx.out);
  const BiorthogonalityReport bio = biorthogonality_matrix(rc.plant, n_max, m_max, cat.quadrature());
  cx.out << std::setprecision(6) << "# biorthogonality: max offdiag " << bio.max_offdiag
         << ", max diag deviation " << bio.max_diag_dev << ", max |factor - 1| " << bio.max_factor_dev
         << '\n';
  cx.out << "# rho = " << std::setprecision(17) << rc.plant.rho() << '\n';
  write_csv(cx, "spectrum.csv", table);
  return exit_code::kOk;
}

struct ScanArgs {
  int n = 2;
  std::string param = "b";
  std::string range;
  int samples = 201;
};

int cmd_gamma_scan(const Context& cx, const ScanArgs& a) {
  const RunConfig& rc = cx.cfg;
  if (a.param != "b") throw UsageError("gamma-scan varies the support end 'b' only, got --param " + a.param);
  if (a.n < 1) throw UsageError("gamma-scan needs --n >= 1");
  if (a.samples < 2) throw UsageError("gamma-scan needs --samples >= 2");
  double lo = 0.0, hi = rc.plant.L;
  if (!a.range.empty()) {
    const auto colon = a.range.find(':');
    if (colon == std::string::npos || !parse_number(a.range.substr(0, colon), lo) ||
        !parse_number(a.range.substr(colon + 1), hi)) {
      throw UsageError("--range expects lo:hi, got '" + a.range + "'");
    }
  }
  if (!(lo < hi)) throw UsageError("--range is empty");

  const BetaProfile& beta = rc.plant.beta;
  if (beta.kind() == BetaProfile::Kind::Constant) {
    cx.out << "no roots\n";
    if (beta.beta0() == 0.0) {
      cx.out << "note: beta = 0, so every gamma_n vanishes and no heat mode is controllable\n";
    } else {
      const GammaCoefficient g = gamma(rc.plant, a.n);
      cx.out << std::setprecision(17) << "gamma_" << a.n << " = " << g.value << '\n'
             << "note: a constant nonzero beta gives gamma_n != 0 for every n, so the reduced "
                "model is controllable for every N0\n";
    }
    return exit_code::kOk;
  }
  if (beta.kind() != BetaProfile::Kind::Indicator) {
    throw ConfigError("gamma-scan varies the support end b of an indicator beta; got " + beta.describe());
  }
  const GammaScan scan = gamma_scan(rc.plant, a.n, lo, hi, a.samples);
  if (scan.roots.empty()) {
    cx.out << "no roots\n";
  } else {
    cx.out << std::setprecision(17);
    for (const auto& r : scan.roots) {
      cx.out << "root b = " << r.b << " gamma = " << r.gamma
             << (r.converged ? " converged" : " not converged")
             << (r.resolution_limited ? " (resolution limited)" : "") << '\n';
    }
  }
  write_csv(cx, "gamma_scan.csv", [&](std::ostream& os) { write_gamma_scan_csv(os, scan); });
  return exit_code::kOk;
}

nlohmann::json gains_file(const GainSet& g, int N0, int N, int M) {
  nlohmann::json j = to_json(g);
  j["N0"] = N0;
  j["N"] = N;
  j["M"] = M;
  return j;
}

int cmd_synth(const Context& cx, std::optional<int> n_max, std::optional<int> m_max) {
  const RunConfig& rc = cx.cfg;
  SearchOptions opts;
  opts.N0 = rc.N0;
  opts.N_max = n_max.value_or(rc.N_max);
  opts.M_max = m_max.value_or(rc.M_max);
  opts.K_targets = rc.K_targets;
  opts.L_targets = rc.L_targets;
  opts.params = rc.certificate;
  opts.tail_cutoff = rc.tail_cutoff;
  const SearchResult res = search_NM(rc.plant, rc.measurement, opts);
  const Certificate& c = res.certificate;
  cx.out << std::setprecision(6);
  if (res.found) {
    cx.out << "feasible certificate at (N, M) = (" << res.N << ", " << res.M << ") after "
           << res.evaluations.size() << " evaluations\n"
           << "  mode " << c.mode << ", epsilon " << c.epsilon << ", eta1 " << c.eta1 << ", eta2 "
           << c.eta2 << "\n  Gamma1 " << c.Gamma1 << ", Gamma2 " << c.Gamma2 << ", theta max eig "
           << c.theta_max_eig << ", Lyapunov residual " << c.lyapunov_residual << '\n';
    if (c.mode == "bounded_real") cx.out << "  bounded-real margin " << c.bounded_real_margin << '\n';
  } else {
    cx.out << "no feasible (N, M) with N <= " << std::max(opts.N_max, opts.N0 + 1)
           << " and M <= " << opts.M_max << "\n  N  M  Gamma1  Gamma2  theta_max_eig  tol_psd\n";
    for (const auto& e : res.evaluations) {
      cx.out << "  " << e.N << "  " << e.M << "  " << e.Gamma1 << "  " << e.Gamma2 << "  "
             << e.theta_max_eig << "  " << e.tol_psd << '\n';
    }
    cx.out << "least violating: (" << c.N << ", " << c.M << "), violation " << c.violation();
    if (c.mode == "bounded_real") cx.out << ", bounded-real margin " << c.bounded_real_margin;
    cx.out << '\n';
  }
  cx.out << "K = [";
  for (Eigen::Index i = 0; i < res.gains.K.size(); ++i) cx.out << (i ? ", " : "") << res.gains.K(i);
  cx.out << "], L = [";
  for (Eigen::Index i = 0; i < res.gains.L_obs.size(); ++i) cx.out << (i ? ", " : "") << res.gains.L_obs(i);
  cx.out << "]\n";
  write_json(cx, "synth.json", to_json(res));
  if (!res.found) throw CertificateExhausted("certificate search exhausted");
  write_json(cx, "gains.json", gains_file(res.gains, rc.N0, res.N, res.M));
  return exit_code::kOk;
}

struct SimArgs {
  std::string gains_path;
  bool open_loop = false;
  std::string integrator;
};

int cmd_simulate(const Context& cx, const SimArgs& a) {
  RunConfig rc = cx.cfg;
  SimConfig& sc = rc.sim;
  if (a.open_loop) sc.open_loop = true;
  if (!a.integrator.empty()) {
    if (a.integrator == "auto") sc.integrator = SimConfig::Integrator::Auto;
    else if (a.integrator == "rk4") sc.integrator = SimConfig::Integrator::RK4;
    else if (a.integrator == "splitting") sc.integrator = SimConfig::Integrator::Splitting;
    else throw UsageError("--integrator expects auto, rk4 or splitting");
  }
  if (!a.gains_path.empty()) {
    std::ifstream in(a.gains_path);
    if (!in) throw ConfigError("cannot open gains file " + a.gains_path);
    nlohmann::json j;
    try {
      in >> j;
      sc.gains = gains_from_json(j);
      if (j.contains("N")) sc.N = j.at("N").get<int>();
      if (j.contains("M")) sc.M = j.at("M").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("gains file " + a.gains_path + ": " + e.what());
    }
    if (sc.gains.K.size() != rc.N0 + 1) {
      throw ConfigError("gains file " + a.gains_path + " was designed for N0 = " +
                        std::to_string(sc.gains.K.size() - 1) + ", config has N0 = " + std::to_string(rc.N0));
    }
  } else if (sc.open_loop) {
    sc.gains.K = Eigen::RowVectorXd::Zero(rc.N0 + 1);
    sc.gains.L_obs = Eigen::VectorXd::Zero(rc.N0);
  } else {
    const ReducedModel model = build_reduced_model(rc.plant, rc.measurement, rc.N0, rc.N0 + 1, 0);
    sc.gains = design_gains(model, rc.K_targets, rc.L_targets);
  }
  sc.validate();
  const ModalCatalog cat(rc.plant, rc.measurement, std::max(sc.Np, sc.N), std::max(sc.Mp, sc.M));
  const ClosedLoopSystem sys(cat, sc);
  const Trajectory tr = sys.integrate();

  const double t1 = rc.fit_t1, t2 = rc.fit_t2.value_or(sc.T);
  nlohmann::json summary;
  summary["N0"] = rc.N0;
  summary["N"] = sc.N;
  summary["M"] = sc.M;
  summary["Np"] = sc.Np;
  summary["Mp"] = sc.Mp;
  summary["open_loop"] = sc.open_loop;
  summary["integrator"] = tr.integrator;
  summary["dt"] = tr.dt_used;
  summary["T"] = sc.T;
  summary["fit_window"] = {t1, t2};
  summary["gains"] = to_json(sc.gains);
  summary["warnings"] = tr.warnings;
  summary["conj_drift"] = tr.conj_drift;

  cx.out << std::setprecision(6) << "integrator " << tr.integrator << ", dt " << tr.dt_used << ", "
         << tr.t.size() << " samples\n";
  for (const auto& w : tr.warnings) cx.out << "warning: " << w << '\n';
  const std::pair<NormKind, const char*> kinds[] = {{NormKind::H0Modal, "H0_modal"},
                                                     {NormKind::H0Direct, "H0_direct"},
                                                     {NormKind::H1Modal, "H1_modal"},
                                                     {NormKind::H1Direct, "H1_direct"}};
  for (const auto& [kind, name] : kinds) {
    const DecayFit f = estimate_decay_rate(tr, t1, t2, kind);
    summary["decay_rate"][name] = f.rate;
    summary["fit_residual"][name] = f.residual;
    cx.out << "decay rate " << name << " on [" << t1 << ", " << t2 << "] = " << f.rate << '\n';
  }
  const Norms& n0 = tr.norms.front();
  const Norms& nT = tr.norms.back();
  summary["initial_norms"] = {{"H0_modal", n0.H0_modal}, {"H0_direct", n0.H0_direct},
                              {"H1_modal", n0.H1_modal}, {"H1_direct", n0.H1_direct}};
  summary["final_norms"] = {{"H0_modal", nT.H0_modal}, {"H0_direct", nT.H0_direct},
                            {"H1_modal", nT.H1_modal}, {"H1_direct", nT.H1_direct}};
  cx.out << "final H0_direct " << nT.H0_direct << " (initial " << n0.H0_direct << ")\n";

  std::vector<double> w11;
  for (const auto& s : tr.states) w11.push_back(std::abs(s.w(0)));
  const DecayFit g = estimate_decay_rate(tr.t, w11, t1, t2);
  summary["growth_rate_w11"] = -g.rate;
  summary["lambda_11"] = cat.parabolic(1).lambda.real();
  if (sc.open_loop) {
    cx.out << "open loop: growth rate of |w_1,1| = " << -g.rate << " (lambda_1,1 = "
           << cat.parabolic(1).lambda.real() << ")\n";
  }

  write_json(cx, "summary.json", summary);
  write_csv(cx, "trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, tr, sys, true); });
  std::vector<double> grid(rc.snapshot_points);
  for (int i = 0; i < rc.snapshot_points; ++i) grid[i] = rc.plant.L * i / (rc.snapshot_points - 1);
  for (const char* which : {"y", "z", "zt"}) {
    write_csv(cx, std::string("snapshots_") + which + ".csv",
              [&](std::ostream& os) { write_field_csv(os, tr, sys, grid, which); });
  }
  return exit_code::kOk;
}

struct VerifyArgs {
  bool fault = false;
  double fault_scale = 1.01;
  int n_max = 20, m_max = 20;
};

int cmd_verify(const Context& cx, const VerifyArgs& a) {
  const RunConfig& rc = cx.cfg;
  VerifyOptions opts;
  opts.n_max = a.n_max;
  opts.m_max = a.m_max;
  opts.fault_am = a.fault ? a.fault_scale : 1.0;
  opts.N0 = rc.N0;
  opts.K_targets = rc.K_targets;
  opts.L_targets = rc.L_targets;
  if (a.fault) cx.out << "fault injection: A_m scaled by " << opts.fault_am << " inside phi\n";
  const VerifyReport rep = run_verification(rc.plant, rc.measurement, opts);
  write_verify_table(cx.out, rep);
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : rep.checks) {
    j.push_back({{"name", c.name},
                 {"passed", c.passed},
                 {"expected_failure", c.expected_failure},
                 {"skipped", c.skipped},
                 {"value", c.value},
                 {"tolerance", c.tolerance},
                 {"detail", c.detail}});
  }
  write_json(cx, "verify.json", j);
  return rep.all_ok() ? exit_code::kOk : exit_code::kVerifyFailed;
}

void apply_thread_override(std::ostream& err) {
  const char* env = std::getenv("WAVECASCADE_THREADS");
  if (!env || !*env) return;
  int n = 0;
  const auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), n);
  if (ec != std::errc() || *ptr != '\0' || n < 1) {
    err << "warning: ignoring WAVECASCADE_THREADS='" << env << "'\n";
    return;
  }
  Eigen::setNbThreads(n);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Controller synthesis and simulation for the 1-D wave-heat cascade", "wavecascade"};
  app.require_subcommand(1);
  std::string config_path, out_dir;

  auto common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "run configuration (INI)")->required();
    sub->add_option("--out", out_dir, "output directory (overrides [output] directory)");
  };

  int spec_n = 8, spec_m = 8;
  auto* spectrum = app.add_subcommand("spectrum", "eigenvalues, coupling and input/output coefficients");
  common(spectrum);
  spectrum->add_option("--n-max", spec_n, "parabolic modes 1..n");
  spectrum->add_option("--m-max", spec_m, "hyperbolic modes -m..m");

  ScanArgs scan;
  auto* gscan = app.add_subcommand("gamma-scan", "scan gamma_n over the support end b of an indicator beta");
  common(gscan);
  gscan->add_option("--n", scan.n, "parabolic index");
  gscan->add_option("--param", scan.param, "scanned parameter (b)");
  gscan->add_option("--range", scan.range, "lo:hi, default 0:L");
  gscan->add_option("--samples", scan.samples, "grid samples");

  std::optional<int> syn_n, syn_m;
  auto* synth = app.add_subcommand("synth", "search (N, M) for a feasible certificate and write gains");
  common(synth);
  synth->add_option("--n-max", syn_n, "override [synthesis] N_max");
  synth->add_option("--m-max", syn_m, "override [synthesis] M_max");

  SimArgs sim;
  auto* simulate = app.add_subcommand("simulate", "simulate the truncated closed loop");
  common(simulate);
  simulate->add_option("--gains", sim.gains_path, "gains file written by synth");
  simulate->add_flag("--open-loop", sim.open_loop, "disconnect the controller (v = 0)");
  simulate->add_option("--integrator", sim.integrator, "auto, rk4 or splitting");

  VerifyArgs ver;
  auto* verify = app.add_subcommand("verify", "run the property suite and print a pass/fail table");
  common(verify);
  verify->add_flag("--fault-am", ver.fault, "corrupt A_m inside phi (fault injection)");
  verify->add_option("--fault-scale", ver.fault_scale, "factor used by --fault-am");
  verify->add_option("--n-max", ver.n_max, "parabolic modes checked");
  verify->add_option("--m-max", ver.m_max, "hyperbolic modes checked");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_code::kOk : exit_code::kUsage;
  }

  apply_thread_override(err);
  try {
    Context cx{load_run_config(config_path), {}, out, err};
    cx.out_dir = out_dir.empty() ? cx.cfg.output_dir : std::filesystem::path(out_dir);
    std::filesystem::create_directories(cx.out_dir);
    if (*spectrum) return cmd_spectrum(cx, spec_n, spec_m);
    if (*gscan) return cmd_gamma_scan(cx, scan);
    if (*synth) return cmd_synth(cx, syn_n, syn_m);
    if (*simulate) return cmd_simulate(cx, sim);
    if (*verify) return cmd_verify(cx, ver);
    return exit_code::kUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return exit_code::kUsage;
  } catch (const CertificateExhausted& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kCertificateExhausted;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_code::kConfigInvalid;
  } catch (const KalmanError& e) {
    err << "Kalman condition failed: " << e.what() << '\n';
    return exit_code::kKalman;
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << '\n';
    return exit_code::kDivergence;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return exit_code::kNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "config error: " << e.what() << '\n';
    return exit_code::kConfigInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kNumerical;
  }
}

}  // namespace wavecascade
