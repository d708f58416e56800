#include "misp/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>

#include "json.hpp"

#include "misp/diagnostics.hpp"
#include "misp/errors.hpp"
#include "misp/stats.hpp"

namespace misp {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_double(const std::string& s, double* out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* begin = t.data();
  const char* end = begin + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, *out);
  return ec == std::errc() && ptr == end;
}

bool parse_int(const std::string& s, long long* out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* begin = t.data();
  const char* end = begin + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, *out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string> read_lines(const std::string& path,
                                    ErrorCategory missing_cat) {
  std::ifstream in(path);
  if (!in.is_open()) {
    throw_error(missing_cat, "cannot open '" + path + "'");
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out.is_open()) {
    throw_error(ErrorCategory::Io, "cannot write '" + path + "'");
  }
  return out;
}

void finish_out(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out.good()) {
    throw_error(ErrorCategory::Io, "write to '" + path + "' failed");
  }
}

bool valid_label(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
                    c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

Dataset ingest(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path, ErrorCategory::Io);
  if (lines.empty()) {
    throw_error(ErrorCategory::Data, "'" + path + "' is empty");
  }
  const std::vector<std::string> header = split(lines[0], ',');
  const std::vector<std::string> expected = {
      "site_id", "lat", "lon", "campaign", "core_rep", "depth_m",
      "density_g_cm3"};
  bool header_ok = header.size() == expected.size();
  for (std::size_t i = 0; header_ok && i < expected.size(); ++i) {
    header_ok = trim(header[i]) == expected[i];
  }
  if (!header_ok) {
    throw_error(ErrorCategory::Data,
                "'" + path +
                    "': header must be site_id,lat,lon,campaign,core_rep,"
                    "depth_m,density_g_cm3");
  }

  struct Row {
    std::string site_id;
    double lat, lon;
    std::string campaign;
    long long core_rep;
    double depth, density;
  };
  // (site_id, core_rep) -> position in cores, first-seen order.
  std::map<std::pair<std::string, long long>, std::size_t> core_of;
  std::vector<CoreRecord> cores;
  std::vector<SiteLocation> locations;
  std::set<std::tuple<std::string, long long, double>> seen_depths;

  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const std::string at = "'" + path + "' row " + std::to_string(li + 1);
    const std::vector<std::string> cells = split(lines[li], ',');
    if (cells.size() != expected.size()) {
      throw_error(ErrorCategory::Data,
                  at + ": expected 7 fields, found " +
                      std::to_string(cells.size()));
    }
    Row row;
    row.site_id = trim(cells[0]);
    if (!valid_label(row.site_id)) {
      throw_error(ErrorCategory::Data,
                  at + ": site_id must be nonempty [A-Za-z0-9_.-]");
    }
    row.campaign = trim(cells[3]);
    if (!valid_label(row.campaign)) {
      throw_error(ErrorCategory::Data,
                  at + ": campaign must be nonempty [A-Za-z0-9_.-]");
    }
    if (!parse_double(cells[1], &row.lat) ||
        !parse_double(cells[2], &row.lon) ||
        !parse_double(cells[5], &row.depth) ||
        !parse_double(cells[6], &row.density)) {
      throw_error(ErrorCategory::Data, at + ": malformed number");
    }
    if (!parse_int(cells[4], &row.core_rep) || row.core_rep < 0) {
      throw_error(ErrorCategory::Data,
                  at + ": core_rep must be a nonnegative integer");
    }
    if (!(row.depth >= 0.0)) {
      throw_error(ErrorCategory::Data, at + ": depth_m must be >= 0");
    }
    if (!(row.density > 0.0 && row.density < 0.917)) {
      throw_error(ErrorCategory::Data,
                  at + ": density " + format_double(row.density) +
                      " outside (0, 0.917)");
    }
    if (!seen_depths.insert({row.site_id, row.core_rep, row.depth}).second) {
      throw_error(ErrorCategory::Data,
                  at + ": duplicate measurement for (" + row.site_id +
                      ", rep " + std::to_string(row.core_rep) + ", depth " +
                      format_double(row.depth) + ")");
    }
    const std::pair<std::string, long long> key{row.site_id, row.core_rep};
    auto it = core_of.find(key);
    if (it == core_of.end()) {
      it = core_of.emplace(key, cores.size()).first;
      CoreRecord core;
      core.site_id = row.site_id;
      core.campaign = row.campaign;
      core.core_rep = static_cast<int>(row.core_rep);
      cores.push_back(std::move(core));
      locations.push_back({row.lat, row.lon});
    } else {
      const std::size_t ci = it->second;
      if (locations[ci].latitude != row.lat ||
          locations[ci].longitude != row.lon) {
        throw_error(ErrorCategory::Data,
                    at + ": coordinates disagree with an earlier row of the "
                         "same core");
      }
      if (cores[ci].campaign != row.campaign) {
        throw_error(ErrorCategory::Data,
                    at + ": campaign disagrees with an earlier row of the "
                         "same core");
      }
    }
    CoreRecord& core = cores[it->second];
    core.depths.push_back(row.depth);
    core.densities.push_back(row.density);
    core.x_max = std::max(core.x_max, row.depth);
  }
  if (cores.empty()) {
    throw_error(ErrorCategory::Data, "'" + path + "' holds no measurements");
  }
  Dataset data = build_dataset(cores, locations);
  data.validate(0.917);
  return data;
}

std::string dataset_summary(const Dataset& data) {
  return "n_sites=" + std::to_string(data.n_sites()) +
         " n_cores=" + std::to_string(data.n_cores()) +
         " n_measurements=" + std::to_string(data.n_measurements());
}

namespace {

// One key=value occurrence with its line number, for error messages.
struct ConfigEntry {
  std::string value;
  int line = 0;
};

class ConfigReader {
 public:
  ConfigReader(const std::string& path, std::string text)
      : path_(path), text_(std::move(text)) {
    parse();
  }

  const std::string& text() const { return text_; }

  bool has(const std::string& section, const std::string& key) {
    const auto it = entries_.find(section + "." + key);
    if (it == entries_.end()) return false;
    used_.insert(section + "." + key);
    return true;
  }
  std::string raw(const std::string& section, const std::string& key) {
    return entries_.at(section + "." + key).value;
  }
  int line(const std::string& section, const std::string& key) {
    return entries_.at(section + "." + key).line;
  }

  double number(const std::string& section, const std::string& key) {
    double v = 0.0;
    if (!parse_double(raw(section, key), &v)) {
      fail(section, key, "expects a number");
    }
    return v;
  }
  long long integer(const std::string& section, const std::string& key) {
    long long v = 0;
    if (!parse_int(raw(section, key), &v)) {
      fail(section, key, "expects an integer");
    }
    return v;
  }
  bool boolean(const std::string& section, const std::string& key) {
    const std::string v = raw(section, key);
    if (v == "true") return true;
    if (v == "false") return false;
    fail(section, key, "expects true or false");
    return false;
  }
  std::vector<double> numbers(const std::string& section,
                              const std::string& key) {
    std::vector<double> out;
    for (const std::string& cell : split(raw(section, key), ',')) {
      double v = 0.0;
      if (!parse_double(cell, &v)) fail(section, key, "expects numbers");
      out.push_back(v);
    }
    return out;
  }
  std::vector<std::string> strings(const std::string& section,
                                   const std::string& key) {
    std::vector<std::string> out;
    for (const std::string& cell : split(raw(section, key), ',')) {
      out.push_back(trim(cell));
    }
    return out;
  }
  // lat:lon pairs separated by ';'
  std::vector<SiteLocation> sites(const std::string& section,
                                  const std::string& key) {
    std::vector<SiteLocation> out;
    for (const std::string& pair : split(raw(section, key), ';')) {
      const std::vector<std::string> parts = split(pair, ':');
      double lat = 0.0;
      double lon = 0.0;
      if (parts.size() != 2 || !parse_double(parts[0], &lat) ||
          !parse_double(parts[1], &lon)) {
        fail(section, key, "expects lat:lon pairs separated by ';'");
      }
      out.push_back({lat, lon});
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& section, const std::string& key,
                         const std::string& what) {
    throw_error(ErrorCategory::Config,
                path_ + ":" + std::to_string(line(section, key)) + ": " + key +
                    " " + what);
  }

  void check_all_used() const {
    for (const auto& [full, entry] : entries_) {
      if (used_.count(full) == 0) {
        throw_error(ErrorCategory::Config,
                    path_ + ":" + std::to_string(entry.line) +
                        ": unknown key '" + full + "'");
      }
    }
  }

 private:
  void parse() {
    static const std::set<std::string> known_sections = {
        "model", "basis",   "covariance", "priors",
        "sampler", "cv",    "predict",    "simulate"};
    std::istringstream in(text_);
    std::string line;
    std::string section;
    int ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']') {
          throw_error(ErrorCategory::Config,
                      path_ + ":" + std::to_string(ln) +
                          ": malformed section header");
        }
        section = trim(t.substr(1, t.size() - 2));
        if (known_sections.count(section) == 0) {
          throw_error(ErrorCategory::Config,
                      path_ + ":" + std::to_string(ln) +
                          ": unknown section '" + section + "'");
        }
        continue;
      }
      const std::size_t eq = t.find('=');
      if (eq == std::string::npos) {
        throw_error(ErrorCategory::Config,
                    path_ + ":" + std::to_string(ln) +
                        ": expected key = value");
      }
      if (section.empty()) {
        throw_error(ErrorCategory::Config,
                    path_ + ":" + std::to_string(ln) +
                        ": key outside any section");
      }
      const std::string key = trim(t.substr(0, eq));
      if (key.empty()) {
        throw_error(ErrorCategory::Config,
                    path_ + ":" + std::to_string(ln) + ": empty key");
      }
      const std::string full = section + "." + key;
      if (entries_.count(full) != 0) {
        throw_error(ErrorCategory::Config,
                    path_ + ":" + std::to_string(ln) + ": duplicate key '" +
                        full + "'");
      }
      entries_[full] = {trim(t.substr(eq + 1)), ln};
    }
  }

  std::string path_;
  std::string text_;
  std::map<std::string, ConfigEntry> entries_;
  std::set<std::string> used_;
};

}  // namespace

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.model = default_model_config();
  cfg.simulate.spec.n_sites = 5;
  cfg.simulate.spec.n_depths = 30;
  return cfg;
}

RunConfig parse_run_config(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path, ErrorCategory::Io);
  std::string text;
  for (const auto& l : lines) {
    text += l;
    text += '\n';
  }
  ConfigReader r(path, text);
  RunConfig cfg = default_run_config();
  cfg.source_text = r.text();

  if (r.has("model", "rho_ice")) cfg.model.rho_ice = r.number("model", "rho_ice");
  if (r.has("model", "label")) {
    cfg.model.label = r.raw("model", "label");
    if (!valid_label(cfg.model.label)) {
      r.fail("model", "label", "must be nonempty [A-Za-z0-9_.-]");
    }
  }
  if (r.has("model", "variance_mode")) {
    const std::string v = r.raw("model", "variance_mode");
    if (v == "homoscedastic") {
      cfg.model.variance_mode = VarianceMode::Homoscedastic;
    } else if (v == "fixed_weighted") {
      cfg.model.variance_mode = VarianceMode::FixedWeighted;
    } else if (v == "fixed_weighted_campaign") {
      cfg.model.variance_mode = VarianceMode::FixedWeightedCampaign;
    } else {
      r.fail("model", "variance_mode",
             "must be homoscedastic, fixed_weighted, or "
             "fixed_weighted_campaign");
    }
  }
  if (r.has("model", "data_model")) {
    const std::string v = r.raw("model", "data_model");
    if (v == "trunc_normal") {
      cfg.model.data_model = DataModel::TruncNormal;
    } else if (v == "trunc_t4") {
      cfg.model.data_model = DataModel::TruncT4;
    } else {
      r.fail("model", "data_model", "must be trunc_normal or trunc_t4");
    }
  }

  if (r.has("basis", "family")) {
    const std::string v = r.raw("basis", "family");
    if (v == "mspline") {
      cfg.model.basis.kernel.family = KernelFamily::MSpline;
    } else if (v == "gaussian") {
      cfg.model.basis.kernel.family = KernelFamily::Gaussian;
    } else if (v == "laplace") {
      cfg.model.basis.kernel.family = KernelFamily::Laplace;
    } else if (v == "asym_laplace_left") {
      cfg.model.basis.kernel.family = KernelFamily::AsymmetricLaplaceLeft;
    } else if (v == "asym_laplace_right") {
      cfg.model.basis.kernel.family = KernelFamily::AsymmetricLaplaceRight;
    } else {
      r.fail("basis", "family",
             "must be mspline, gaussian, laplace, asym_laplace_left, or "
             "asym_laplace_right");
    }
  }
  if (r.has("basis", "interior_knots")) {
    cfg.model.basis.knots.interior_knots = r.numbers("basis", "interior_knots");
  }
  if (r.has("basis", "order")) {
    cfg.model.basis.knots.order_l = static_cast<int>(r.integer("basis", "order"));
  }
  if (r.has("basis", "x_min")) cfg.model.basis.knots.x_min = r.number("basis", "x_min");
  if (r.has("basis", "x_max")) cfg.model.basis.knots.x_max = r.number("basis", "x_max");
  if (r.has("basis", "bandwidth")) {
    cfg.model.basis.kernel.bandwidth = r.number("basis", "bandwidth");
  }
  if (r.has("basis", "asymmetry")) {
    cfg.model.basis.kernel.asymmetry = r.number("basis", "asymmetry");
  }

  if (r.has("covariance", "metric")) {
    const std::string v = r.raw("covariance", "metric");
    if (v == "great_circle") {
      cfg.model.covariance.distance = DistanceMetric::GreatCircle;
    } else if (v == "chordal") {
      cfg.model.covariance.distance = DistanceMetric::Chordal3D;
    } else {
      r.fail("covariance", "metric", "must be great_circle or chordal");
    }
  }
  if (r.has("covariance", "smoothness")) {
    const std::string v = r.raw("covariance", "smoothness");
    if (v == "1/2" || v == "0.5") {
      cfg.model.covariance.smoothness = MaternSmoothness::Half;
    } else if (v == "3/2" || v == "1.5") {
      cfg.model.covariance.smoothness = MaternSmoothness::ThreeHalves;
    } else if (v == "5/2" || v == "2.5") {
      cfg.model.covariance.smoothness = MaternSmoothness::FiveHalves;
    } else {
      r.fail("covariance", "smoothness", "must be 1/2, 3/2, or 5/2");
    }
  }

  PriorSpec& pr = cfg.model.priors;
  if (r.has("priors", "gamma0_mean")) pr.gamma0_mean = r.number("priors", "gamma0_mean");
  if (r.has("priors", "gamma0_sd")) pr.gamma0_sd = r.number("priors", "gamma0_sd");
  if (r.has("priors", "gammaj_mean")) pr.gammaj_mean = r.number("priors", "gammaj_mean");
  if (r.has("priors", "gammaj_sd")) pr.gammaj_sd = r.number("priors", "gammaj_sd");
  if (r.has("priors", "sigma2_0_shape")) pr.sigma2_0_shape = r.number("priors", "sigma2_0_shape");
  if (r.has("priors", "sigma2_0_scale")) pr.sigma2_0_scale = r.number("priors", "sigma2_0_scale");
  if (r.has("priors", "sigma2_j_shape")) pr.sigma2_j_shape = r.number("priors", "sigma2_j_shape");
  if (r.has("priors", "sigma2_j_scale")) pr.sigma2_j_scale = r.number("priors", "sigma2_j_scale");
  if (r.has("priors", "phi_lower")) pr.phi_lower = r.number("priors", "phi_lower");
  if (r.has("priors", "phi_upper")) pr.phi_upper = r.number("priors", "phi_upper");
  if (r.has("priors", "tau2_shape")) pr.tau2_shape = r.number("priors", "tau2_shape");
  if (r.has("priors", "tau2_rate")) pr.tau2_rate = r.number("priors", "tau2_rate");

  if (r.has("sampler", "n_chains")) cfg.sampler.n_chains = static_cast<int>(r.integer("sampler", "n_chains"));
  if (r.has("sampler", "n_warmup")) cfg.sampler.n_warmup = static_cast<int>(r.integer("sampler", "n_warmup"));
  if (r.has("sampler", "n_keep")) cfg.sampler.n_keep = static_cast<int>(r.integer("sampler", "n_keep"));
  if (r.has("sampler", "leapfrog_steps")) cfg.sampler.leapfrog_steps = static_cast<int>(r.integer("sampler", "leapfrog_steps"));
  if (r.has("sampler", "target_accept")) cfg.sampler.target_accept = r.number("sampler", "target_accept");
  if (r.has("sampler", "seed")) cfg.sampler.seed = static_cast<std::uint64_t>(r.integer("sampler", "seed"));

  if (r.has("cv", "n_folds")) cfg.cv_folds = static_cast<int>(r.integer("cv", "n_folds"));

  PredictSettings& pd = cfg.predict;
  if (r.has("predict", "targets")) pd.targets = r.sites("predict", "targets");
  if (r.has("predict", "labels")) pd.labels = r.strings("predict", "labels");
  if (r.has("predict", "sites")) pd.site_refs = r.strings("predict", "sites");
  if (r.has("predict", "depths")) pd.depths = r.numbers("predict", "depths");
  if (r.has("predict", "n_depths")) pd.n_depths = static_cast<int>(r.integer("predict", "n_depths"));
  if (r.has("predict", "mode")) {
    pd.mode = r.raw("predict", "mode");
    if (pd.mode != "mean_curve" && pd.mode != "noisy_measurement" &&
        pd.mode != "both") {
      r.fail("predict", "mode",
             "must be mean_curve, noisy_measurement, or both");
    }
  }
  if (r.has("predict", "campaign")) pd.weighting.campaign = r.raw("predict", "campaign");
  if (r.has("predict", "n")) pd.weighting.n = static_cast<int>(r.integer("predict", "n"));
  if (r.has("predict", "x_max")) pd.weighting.x_max = r.number("predict", "x_max");
  if (r.has("predict", "thin")) pd.thin = static_cast<int>(r.integer("predict", "thin"));
  if (r.has("predict", "samples")) pd.samples_path = r.raw("predict", "samples");

  SimulateSettings& sm = cfg.simulate;
  if (r.has("simulate", "mode")) {
    sm.mode = r.raw("simulate", "mode");
    if (sm.mode != "dataset" && sm.mode != "prior_curves") {
      r.fail("simulate", "mode", "must be dataset or prior_curves");
    }
  }
  if (r.has("simulate", "sites")) sm.spec.sites = r.sites("simulate", "sites");
  if (r.has("simulate", "n_sites")) sm.spec.n_sites = static_cast<int>(r.integer("simulate", "n_sites"));
  if (r.has("simulate", "region_km")) sm.spec.region_km = r.number("simulate", "region_km");
  if (r.has("simulate", "cores_per_site")) sm.spec.cores_per_site = static_cast<int>(r.integer("simulate", "cores_per_site"));
  if (r.has("simulate", "depths")) sm.spec.depths = r.numbers("simulate", "depths");
  if (r.has("simulate", "n_depths")) sm.spec.n_depths = static_cast<int>(r.integer("simulate", "n_depths"));
  if (r.has("simulate", "campaigns")) sm.spec.campaigns = r.strings("simulate", "campaigns");
  if (r.has("simulate", "zero_mean_gamma")) sm.zero_mean_gamma = r.boolean("simulate", "zero_mean_gamma");
  if (r.has("simulate", "n_curves")) sm.n_curves = static_cast<int>(r.integer("simulate", "n_curves"));
  if (r.has("simulate", "curve_points")) sm.curve_points = static_cast<int>(r.integer("simulate", "curve_points"));

  r.check_all_used();
  cfg.model.validate();
  cfg.sampler.validate();
  return cfg;
}

void write_samples_csv(const std::string& path,
                       const PosteriorSamples& samples) {
  std::ofstream out = open_out(path);
  out << "chain,draw";
  for (const auto& name : samples.names) out << ',' << name;
  out << '\n';
  for (int c = 0; c < samples.n_chains(); ++c) {
    const Eigen::MatrixXd& draws = samples.chain_draws[c];
    for (int i = 0; i < draws.rows(); ++i) {
      out << c << ',' << i;
      for (int j = 0; j < draws.cols(); ++j) {
        out << ',' << format_double(draws(i, j));
      }
      out << '\n';
    }
  }
  finish_out(out, path);
}

PosteriorSamples read_samples_csv(
    const std::string& path, const std::vector<std::string>& expected_names) {
  const std::vector<std::string> lines = read_lines(path, ErrorCategory::Io);
  if (lines.empty()) {
    throw_error(ErrorCategory::Data, "'" + path + "' is empty");
  }
  std::vector<std::string> header = split(lines[0], ',');
  for (auto& h : header) h = trim(h);
  if (header.size() < 3 || header[0] != "chain" || header[1] != "draw") {
    throw_error(ErrorCategory::Data,
                "'" + path + "': header must start with chain,draw");
  }
  std::vector<std::string> names(header.begin() + 2, header.end());
  if (!expected_names.empty() && names != expected_names) {
    throw_error(ErrorCategory::Data,
                "'" + path +
                    "': parameter columns do not match the model's layout");
  }
  const int dim = static_cast<int>(names.size());

  std::vector<std::vector<Eigen::VectorXd>> rows_by_chain;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const std::string at = "'" + path + "' row " + std::to_string(li + 1);
    const std::vector<std::string> cells = split(lines[li], ',');
    if (static_cast<int>(cells.size()) != dim + 2) {
      throw_error(ErrorCategory::Data, at + ": wrong field count");
    }
    long long chain = 0;
    long long draw = 0;
    if (!parse_int(cells[0], &chain) || !parse_int(cells[1], &draw) ||
        chain < 0) {
      throw_error(ErrorCategory::Data, at + ": malformed chain/draw index");
    }
    if (chain >= static_cast<long long>(rows_by_chain.size())) {
      if (chain != static_cast<long long>(rows_by_chain.size())) {
        throw_error(ErrorCategory::Data,
                    at + ": chains must appear in order 0,1,...");
      }
      rows_by_chain.emplace_back();
    }
    Eigen::VectorXd v(dim);
    for (int j = 0; j < dim; ++j) {
      double x = 0.0;
      if (!parse_double(cells[j + 2], &x)) {
        throw_error(ErrorCategory::Data, at + ": malformed number");
      }
      v(j) = x;
    }
    rows_by_chain[chain].push_back(std::move(v));
  }
  if (rows_by_chain.empty()) {
    throw_error(ErrorCategory::Data, "'" + path + "' holds no draws");
  }
  const std::size_t n = rows_by_chain[0].size();
  PosteriorSamples out;
  out.names = std::move(names);
  for (const auto& rows : rows_by_chain) {
    if (rows.size() != n) {
      throw_error(ErrorCategory::Data,
                  "'" + path + "': chains have unequal draw counts");
    }
    Eigen::MatrixXd m(n, dim);
    for (std::size_t i = 0; i < n; ++i) m.row(i) = rows[i];
    out.chain_draws.push_back(std::move(m));
  }
  return out;
}

namespace {

// Per-parameter chain columns for the diagnostics calls.
std::vector<std::vector<double>> chain_columns(const PosteriorSamples& samples,
                                               int j) {
  std::vector<std::vector<double>> chains;
  for (const auto& m : samples.chain_draws) {
    std::vector<double> col(m.rows());
    for (int i = 0; i < m.rows(); ++i) col[i] = m(i, j);
    chains.push_back(std::move(col));
  }
  return chains;
}

std::string diag_cell(const DiagnosticResult& r) {
  return r.defined ? format_double(r.value) : "nan";
}

}  // namespace

void write_summary_csv(const std::string& path,
                       const PosteriorSamples& samples) {
  std::ofstream out = open_out(path);
  out << "parameter,mean,sd,q025,q975,rhat,ess\n";
  const Eigen::MatrixXd pool = samples.pooled();
  const bool diagnosable = samples.n_chains() >= 2 && samples.n_keep() >= 4;
  for (int j = 0; j < samples.dim(); ++j) {
    std::vector<double> col(pool.rows());
    for (int i = 0; i < pool.rows(); ++i) col[i] = pool(i, j);
    const double mu = mean(col);
    const double sd = col.size() >= 2 ? std::sqrt(variance(col)) : 0.0;
    std::sort(col.begin(), col.end());
    out << samples.names[j] << ',' << format_double(mu) << ','
        << format_double(sd) << ',' << format_double(quantile_sorted(col, 0.025))
        << ',' << format_double(quantile_sorted(col, 0.975));
    if (diagnosable) {
      const auto chains = chain_columns(samples, j);
      out << ',' << diag_cell(split_rhat(chains)) << ','
          << diag_cell(effective_sample_size(chains));
    } else {
      out << ",nan,nan";
    }
    out << '\n';
  }
  finish_out(out, path);
}

void write_diagnostics_csv(const std::string& path,
                           const PosteriorSamples& samples) {
  std::ofstream out = open_out(path);
  out << "parameter,rhat,ess\n";
  const bool diagnosable = samples.n_chains() >= 2 && samples.n_keep() >= 4;
  for (int j = 0; j < samples.dim(); ++j) {
    out << samples.names[j];
    if (diagnosable) {
      const auto chains = chain_columns(samples, j);
      out << ',' << diag_cell(split_rhat(chains)) << ','
          << diag_cell(effective_sample_size(chains));
    } else {
      out << ",nan,nan";
    }
    out << '\n';
  }
  finish_out(out, path);
}

void write_traces_csv(const std::string& path, const PosteriorSamples& samples,
                      int max_per_chain) {
  std::ofstream out = open_out(path);
  out << "chain,draw,parameter,value\n";
  const int n = samples.n_keep();
  const int stride = std::max(1, (n + max_per_chain - 1) / max_per_chain);
  for (int c = 0; c < samples.n_chains(); ++c) {
    const Eigen::MatrixXd& draws = samples.chain_draws[c];
    for (int j = 0; j < samples.dim(); ++j) {
      for (int i = 0; i < n; i += stride) {
        out << c << ',' << i << ',' << samples.names[j] << ','
            << format_double(draws(i, j)) << '\n';
      }
    }
  }
  finish_out(out, path);
}

void write_curves_csv(const std::string& path,
                      const std::vector<PredictiveDraws>& bundles) {
  std::ofstream out = open_out(path);
  out << "site_label,depth_m,mean,q025,q975,mode\n";
  for (const auto& b : bundles) {
    const std::string mode = b.mode == PredictionMode::MeanCurve
                                 ? "mean_curve"
                                 : "noisy_measurement";
    for (std::size_t t = 0; t < b.labels.size(); ++t) {
      for (std::size_t k = 0; k < b.depths.size(); ++k) {
        out << b.labels[t] << ',' << format_double(b.depths[k]) << ','
            << format_double(b.mean(t, k)) << ',' << format_double(b.q025(t, k))
            << ',' << format_double(b.q975(t, k)) << ',' << mode << '\n';
      }
    }
  }
  finish_out(out, path);
}

void write_cv_report_csv(const std::string& path,
                         const std::vector<CvMetrics>& rows,
                         const std::vector<double>& relative) {
  if (rows.size() != relative.size()) {
    throw_error(ErrorCategory::Index,
                "one relative CRPS per report row required");
  }
  std::ofstream out = open_out(path);
  out << "model_label,ISE,IAE,CRPS,relative_CRPS\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << rows[i].model_label << ',' << format_double(rows[i].ise) << ','
        << format_double(rows[i].iae) << ',' << format_double(rows[i].crps)
        << ',' << format_double(relative[i]) << '\n';
  }
  finish_out(out, path);
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream out = open_out(path);
  out << "site_id,lat,lon,campaign,core_rep,depth_m,density_g_cm3\n";
  for (const auto& core : data.cores) {
    const SiteLocation& loc = data.sites[core.site_index];
    for (int i = 0; i < core.n(); ++i) {
      out << core.site_id << ',' << format_double(loc.latitude) << ','
          << format_double(loc.longitude) << ',' << core.campaign << ','
          << core.core_rep << ',' << format_double(core.depths[i]) << ','
          << format_double(core.densities[i]) << '\n';
    }
  }
  finish_out(out, path);
}

void write_truth_csv(const std::string& path,
                     const std::vector<std::string>& names,
                     const Eigen::VectorXd& values) {
  if (static_cast<int>(names.size()) != values.size()) {
    throw_error(ErrorCategory::Index, "truth names/values length mismatch");
  }
  std::ofstream out = open_out(path);
  out << "parameter,value\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << names[i] << ',' << format_double(values(i)) << '\n';
  }
  finish_out(out, path);
}

void write_prior_curves_csv(const std::string& path,
                            const std::vector<double>& depths,
                            const std::vector<Eigen::VectorXd>& curves) {
  std::ofstream out = open_out(path);
  out << "draw,depth_m,density_g_cm3\n";
  for (std::size_t d = 0; d < curves.size(); ++d) {
    for (std::size_t k = 0; k < depths.size(); ++k) {
      out << d << ',' << format_double(depths[k]) << ','
          << format_double(curves[d](k)) << '\n';
    }
  }
  finish_out(out, path);
}

void write_manifest(const std::string& path, const std::string& command,
                    const RunConfig& cfg, const std::string& data_path,
                    const std::string& data_bytes, std::uint64_t seed,
                    int threads, const std::vector<std::string>& outputs) {
  nlohmann::json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["seed"] = seed;
  j["threads"] = threads;
  j["config_text"] = cfg.source_text;
  j["config_hash"] = fnv1a_hex(cfg.source_text);
  j["data_path"] = data_path;
  j["data_hash"] = data_path.empty() ? "" : fnv1a_hex(data_bytes);
  j["outputs"] = outputs;
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  finish_out(out, path);
}

}  // namespace misp
