#include "gmusic/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace gmusic::io {

namespace {

constexpr char kMagic[4] = {'G', 'M', 'A', 'T'};

Json finite_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

double number_or_inf(const Json& j, const char* key) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "Infinity") return std::numeric_limits<double>::infinity();
  }
  throw ValidationError(std::string("json: ") + key + " must be a number or \"inf\"");
}

template <typename T>
T required(const Json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string("json: missing key ") + key);
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("json: bad value for ") + key + ": " + e.what());
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& s, const std::string& token) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && s.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ValidationError("matrix: cannot parse complex token '" + token + "'");
  }
  return v;
}

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw ValidationError("matrix: truncated binary file");
  }
  return v;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

Json scenario_to_json(const ArrayScenario& s) {
  Json j;
  j["m"] = s.m;
  j["n"] = s.n;
  j["k"] = s.k;
  j["angles_deg"] = s.angles_deg;
  if (std::isinf(s.snr_db)) {
    j["snr_db"] = "inf";
  } else {
    j["snr_db"] = s.snr_db;
  }
  j["ar_coeff"] = s.ar_coeff;
  j["master_seed"] = s.master_seed;
  return j;
}

ArrayScenario scenario_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("scenario: expected a JSON object");
  static const char* kKeys[] = {"m", "n", "k", "angles_deg", "snr_db", "ar_coeff", "master_seed"};
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys),
                     [&](const char* k) { return key == k; }) == std::end(kKeys)) {
      throw ValidationError("scenario: unknown key " + key);
    }
  }
  ArrayScenario s;
  s.m = required<int>(j, "m");
  s.n = required<int>(j, "n");
  s.k = required<int>(j, "k");
  s.angles_deg = required<std::vector<double>>(j, "angles_deg");
  if (!j.contains("snr_db")) throw ValidationError("json: missing key snr_db");
  s.snr_db = number_or_inf(j.at("snr_db"), "snr_db");
  s.ar_coeff = required<double>(j, "ar_coeff");
  s.master_seed = required<std::uint64_t>(j, "master_seed");
  s.validate();
  return s;
}

Json config_to_json(const ExperimentConfig& cfg) {
  Json j;
  j["scenario"] = scenario_to_json(cfg.scenario);
  j["snr_grid_db"] = cfg.snr_grid_db;
  j["trials"] = cfg.trials;
  j["theta_eval"] = cfg.theta_eval;
  j["grid_step_deg"] = cfg.grid_step_deg;
  Json est = Json::array();
  if (cfg.use_traditional) est.push_back("traditional");
  if (cfg.use_new) est.push_back("new");
  j["estimators"] = est;
  j["workers"] = cfg.workers;
  return j;
}

ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  static const char* kKeys[] = {"preset",     "scenario",      "snr_grid_db", "trials",
                                "theta_eval", "grid_step_deg", "estimators",  "workers"};
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys),
                     [&](const char* k) { return key == k; }) == std::end(kKeys)) {
      throw ValidationError("config: unknown key " + key);
    }
  }
  ExperimentConfig cfg;
  if (j.contains("preset")) cfg = preset(required<std::string>(j, "preset"));
  if (j.contains("scenario")) cfg.scenario = scenario_from_json(j.at("scenario"));
  if (j.contains("snr_grid_db")) cfg.snr_grid_db = required<std::vector<double>>(j, "snr_grid_db");
  if (j.contains("trials")) cfg.trials = required<int>(j, "trials");
  if (j.contains("theta_eval")) cfg.theta_eval = required<std::vector<double>>(j, "theta_eval");
  if (j.contains("grid_step_deg")) cfg.grid_step_deg = required<double>(j, "grid_step_deg");
  if (j.contains("workers")) cfg.workers = required<int>(j, "workers");
  if (j.contains("estimators")) {
    cfg.use_traditional = false;
    cfg.use_new = false;
    for (const auto& name : required<std::vector<std::string>>(j, "estimators")) {
      if (name == "traditional") {
        cfg.use_traditional = true;
      } else if (name == "new") {
        cfg.use_new = true;
      } else if (name == "unconditional") {
        throw ValidationError("config: the unconditional estimator is not implemented");
      } else {
        throw ValidationError("config: unknown estimator " + name);
      }
    }
  }
  cfg.validate();
  return cfg;
}

SignalSpectrum spectrum_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("spectrum: expected a JSON object");
  return SignalSpectrum(required<std::vector<double>>(j, "gammas"), required<double>(j, "sigma2"),
                        required<double>(j, "c"));
}

Json support_to_json(const SupportProfile& profile) {
  Json clusters = Json::array();
  for (const auto& c : profile.clusters) {
    clusters.push_back({{"x_minus", c.x_minus},
                        {"x_plus", c.x_plus},
                        {"w_minus", c.w_minus},
                        {"w_plus", c.w_plus},
                        {"eig_indices", c.eig_indices}});
  }
  Json j;
  j["clusters"] = clusters;
  j["q"] = profile.q_count;
  j["separated"] = profile.separated();
  if (profile.separation) {
    j["t1_minus"] = finite_or_null(profile.separation->t1_minus);
    j["t1_plus"] = finite_or_null(profile.separation->t1_plus);
    j["t2_minus"] = finite_or_null(profile.separation->t2_minus);
  } else {
    j["t1_minus"] = nullptr;
    j["t1_plus"] = nullptr;
    j["t2_minus"] = nullptr;
  }
  return j;
}

void write_density_csv(std::ostream& os, const SupportProfile& profile,
                       const SignalSpectrum& spec, int points) {
  if (points < 2) throw ValidationError("density: need at least two points");
  const double top = profile.clusters.back().x_plus * 1.05;
  os << "x,density\n";
  for (int i = 0; i < points; ++i) {
    const double x = top * i / (points - 1);
    const double d = x > 0.0 ? density(x, profile, spec) : 0.0;
    os << format_double(x) << ',' << format_double(d) << '\n';
  }
}

Complex parse_complex(const std::string& raw) {
  std::string token = trim(raw);
  if (!token.empty() && token.front() == '(' && token.back() == ')') {
    token = token.substr(1, token.size() - 2);
  }
  if (token.empty()) throw ValidationError("matrix: empty complex token");
  if (token.back() != 'j' && token.back() != 'i') return {parse_real(token, raw), 0.0};
  const std::string body = token.substr(0, token.size() - 1);
  // Split at the last sign that is not an exponent sign.
  std::size_t split = std::string::npos;
  for (std::size_t p = body.size(); p-- > 1;) {
    if ((body[p] == '+' || body[p] == '-') && body[p - 1] != 'e' && body[p - 1] != 'E') {
      split = p;
      break;
    }
  }
  if (split == std::string::npos) {
    const double im = (body.empty() || body == "+") ? 1.0 : body == "-" ? -1.0 : parse_real(body, raw);
    return {0.0, im};
  }
  const std::string re = body.substr(0, split);
  const std::string im = body.substr(split);
  const double im_v = im == "+" ? 1.0 : im == "-" ? -1.0 : parse_real(im, raw);
  return {parse_real(re, raw), im_v};
}

CMatrix read_matrix_csv(std::istream& is) {
  std::vector<std::vector<Complex>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    std::vector<Complex> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(parse_complex(cell));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ValidationError("matrix: ragged CSV rows");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("matrix: empty CSV");
  CMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

void write_matrix_csv(std::ostream& os, const CMatrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) os << ',';
      const double im = m(r, c).imag();
      os << format_double(m(r, c).real()) << (std::signbit(im) ? "-" : "+")
         << format_double(std::abs(im)) << 'j';
    }
    os << '\n';
  }
}

CMatrix read_matrix_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw ValidationError("matrix: bad binary magic");
  }
  const auto rows = get<std::uint32_t>(is);
  const auto cols = get<std::uint32_t>(is);
  CMatrix m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const double re = get<double>(is);
      const double im = get<double>(is);
      m(r, c) = {re, im};
    }
  }
  return m;
}

void write_matrix_binary(std::ostream& os, const CMatrix& m) {
  os.write(kMagic, 4);
  put(os, static_cast<std::uint32_t>(m.rows()));
  put(os, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      put(os, m(r, c).real());
      put(os, m(r, c).imag());
    }
  }
}

CMatrix read_matrix_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  char magic[4] = {};
  in.read(magic, 4);
  const bool binary = in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0;
  in.clear();
  in.seekg(0);
  return binary ? read_matrix_binary(in) : read_matrix_csv(in);
}

Json estimate_to_json(const EigenSystem& eig, const OmegaRoots& roots, const XiWeights& xi) {
  Json j;
  j["lambdas"] = std::vector<double>(eig.lambdas.data(), eig.lambdas.data() + eig.lambdas.size());
  j["omegas"] = roots.omegas;
  j["xi"] = xi.xi;
  return j;
}

void write_pseudospectrum_csv(std::ostream& os, const PseudospectrumScan& trad,
                              const PseudospectrumScan& fresh) {
  if (trad.thetas_deg != fresh.thetas_deg) {
    throw ValidationError("pseudospectrum: scans use different grids");
  }
  os << "theta_deg,eta_trad,eta_new\n";
  for (std::size_t i = 0; i < trad.thetas_deg.size(); ++i) {
    os << format_double(trad.thetas_deg[i]) << ',' << format_double(trad.eta_values[i]) << ','
       << format_double(fresh.eta_values[i]) << '\n';
  }
}

void write_results_csv(std::ostream& os, const AggregateStats& stats) {
  os << "snr_db,theta_deg,mse_trad,mse_new,ratio_db,angle_mse_trad,angle_mse_new,"
        "outlier_trad,outlier_new,sep_fraction\n";
  for (const auto& s : stats.per_snr) {
    for (std::size_t j = 0; j < stats.theta_eval.size(); ++j) {
      os << format_double(s.snr_db) << ',' << format_double(stats.theta_eval[j]) << ','
         << format_double(s.mse_trad[j]) << ',' << format_double(s.mse_new[j]) << ','
         << format_double(s.ratio_db[j]) << ',' << format_double(s.angle_mse_trad) << ','
         << format_double(s.angle_mse_new) << ',' << format_double(s.outlier_trad) << ','
         << format_double(s.outlier_new) << ',' << format_double(s.sep_fraction) << '\n';
    }
  }
}

void write_trials_csv(std::ostream& os, const ExperimentConfig& cfg,
                      const std::vector<TrialRecord>& records) {
  os << "snr_db,trial";
  for (std::size_t j = 0; j < cfg.theta_eval.size(); ++j) {
    os << ",eta_trad_" << j << ",eta_new_" << j;
  }
  for (int i = 0; i < cfg.scenario.k; ++i) os << ",angle_trad_" << i << ",angle_new_" << i;
  os << ",outlier_trad,outlier_new,noise_cluster_count,exact_separation\n";
  const auto at = [](const std::vector<double>& v, std::size_t i) {
    return i < v.size() ? v[i] : std::numeric_limits<double>::quiet_NaN();
  };
  for (const auto& r : records) {
    os << format_double(r.snr_db) << ',' << r.trial;
    for (std::size_t j = 0; j < cfg.theta_eval.size(); ++j) {
      os << ',' << format_double(at(r.eta_trad, j)) << ',' << format_double(at(r.eta_new, j));
    }
    for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.scenario.k); ++i) {
      os << ',' << format_double(at(r.angles_trad, i)) << ','
         << format_double(at(r.angles_new, i));
    }
    os << ',' << (r.outlier_trad ? 1 : 0) << ',' << (r.outlier_new ? 1 : 0) << ','
       << r.noise_cluster_count << ',' << (r.exact_separation ? 1 : 0) << '\n';
  }
}

Json diagnostics_to_json(const std::vector<LocationDiagnostics>& diags) {
  Json out = Json::array();
  for (const auto& d : diags) {
    Json j;
    j["snr_db"] = d.snr_db;
    j["refused"] = d.refused;
    j["q"] = d.q_count;
    if (d.refused) {
      j["reason"] = d.reason;
    } else {
      j["t1_minus"] = finite_or_null(d.margins.t1_minus);
      j["t1_plus"] = finite_or_null(d.margins.t1_plus);
      j["t2_minus"] = finite_or_null(d.margins.t2_minus);
      j["noise_counts"] = d.noise_counts;
      j["exact"] = d.exact;
      j["fraction"] = d.fraction;
    }
    out.push_back(j);
  }
  return out;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError("invalid JSON in " + path + ": " + e.what());
  }
}

}  // namespace gmusic::io
