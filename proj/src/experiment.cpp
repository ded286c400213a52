#include "pinchlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <openssl/evp.h>
#include <toml.hpp>

#include "pinchlab/acceptance.hpp"
#include "pinchlab/errors.hpp"
#include "pinchlab/homogeneous.hpp"

namespace pinchlab::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Kind k) {
  switch (k) {
    case Kind::Homogeneous: return "homogeneous";
    case Kind::Warped: return "warped";
    case Kind::Certificate: return "certificate";
    case Kind::Variation: return "variation";
    case Kind::Proposition: return "proposition";
  }
  return "unknown";
}

Kind kind_from_string(const std::string& s) {
  for (Kind k : {Kind::Homogeneous, Kind::Warped, Kind::Certificate, Kind::Variation, Kind::Proposition})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown scenario kind '" + s + "'");
}

namespace {

const std::set<std::string> kProfiles{"cylinder", "perturbed-cylinder", "generic"};
const std::set<std::string> kRecipes{"rc", "metric", "custom", "random"};

bool warped_geometry(Kind k) { return k == Kind::Warped || k == Kind::Variation || k == Kind::Proposition; }

std::string scheme_name(linearization::Scheme s) {
  return s == linearization::Scheme::Central ? "central" : "forward";
}

}  // namespace

void Scenario::validate() const {
  auto fail = [&](const std::string& what) { throw ConfigError(name + ": " + what); };
  if (name.empty()) throw ConfigError("scenario name must not be empty");
  if (name.find_first_of("/\\ ") != std::string::npos || name == "." || name == "..")
    fail("name must not contain path separators or spaces");
  if (group != "quick" && group != "full") fail("group must be 'quick' or 'full'");
  if (!(rho >= 0.0) || !std::isfinite(rho)) fail("rho must be a finite number >= 0");
  if (kind != Kind::Certificate && !(horizon > 0.0 && std::isfinite(horizon))) fail("horizon must be positive");

  if (kind == Kind::Homogeneous) {
    homogeneous::MilnorClass::by_name(milnor_class);
    for (double m : metric)
      if (!(m > 0.0) || !std::isfinite(m)) fail("metric coefficients must be positive");
    if (h_recipe == "custom" && h_coefficients.size() != 3) fail("custom h needs three coefficients");
    if (!(ode.rtol > 0.0 && ode.atol > 0.0)) fail("rtol and atol must be positive");
  }
  if (warped_geometry(kind)) {
    if (!kProfiles.count(profile)) fail("unknown profile '" + profile + "'");
    if (!(radius > 0.0)) fail("radius must be positive");
    if (!(std::abs(amplitude) < 1.0)) fail("amplitude must lie in (-1, 1)");
    if (grid < 16 || grid % 2 != 0) fail("grid must be even and at least 16");
    if (h_recipe == "custom" && h_alpha.empty() && h_beta.empty()) fail("custom h needs alpha or beta coefficients");
    if (!(warped.cfl_safety > 0.0 && warped.cfl_safety <= 1.0)) fail("cfl_safety must lie in (0, 1]");
    if (!(warped.max_dt > 0.0)) fail("max_dt must be positive");
  }
  if (kind != Kind::Certificate) {
    if (!kRecipes.count(h_recipe)) fail("unknown h recipe '" + h_recipe + "'");
    if (h_recipe == "random" && !h_seed) fail("random h recipe requires a seed");
  }
  if (kind == Kind::Proposition && h_recipe == "rc") fail("proposition families take metric, custom or random variations");
  if (kind == Kind::Variation || kind == Kind::Proposition) {
    if (s_values.empty()) fail("s_values must not be empty");
    for (double s : s_values)
      if (!(s > 0.0)) fail("s_values must be positive");
    if (!(proposition_cfl_safety > 0.0 && proposition_cfl_safety <= 1.0)) fail("cfl_safety must lie in (0, 1]");
  }
  if (kind == Kind::Certificate) {
    if (plan.samples == 0) fail("samples must be positive");
    if (!(plan.lo < plan.hi)) fail("lo must be below hi");
    if (!(plan.heavy_tail_fraction >= 0.0 && plan.heavy_tail_fraction <= 1.0))
      fail("heavy_tail_fraction must lie in [0, 1]");
  }
  if (expect_exit != 0 && expect_exit != 3 && expect_exit != 4) fail("expected exit must be 0, 3 or 4");
}

json to_json(const Scenario& s) {
  auto opt = [](const auto& o) -> json { return o ? json(*o) : json(nullptr); };
  return {
      {"name", s.name},
      {"description", s.description},
      {"kind", to_string(s.kind)},
      {"group", s.group},
      {"rho", s.rho},
      {"horizon", s.horizon},
      {"geometry",
       {{"class", s.milnor_class},
        {"metric", s.metric},
        {"profile", s.profile},
        {"radius", s.radius},
        {"amplitude", s.amplitude},
        {"grid", s.grid}}},
      {"h",
       {{"recipe", s.h_recipe},
        {"coefficients", s.h_coefficients},
        {"alpha", s.h_alpha},
        {"beta", s.h_beta},
        {"seed", opt(s.h_seed)},
        {"scale", s.h_scale}}},
      {"controls",
       {{"rtol", s.ode.rtol},
        {"atol", s.ode.atol},
        {"initial_step", s.ode.initial_step},
        {"max_step", s.ode.max_step},
        {"blowup_factor", s.blowup_factor},
        {"cfl_safety", s.warped.cfl_safety},
        {"max_dt", s.warped.max_dt},
        {"max_steps", s.warped.max_steps},
        {"neckpinch_ratio", s.warped.neckpinch_ratio},
        {"sample_every", s.warped.sample_every},
        {"snapshot_every", s.warped.snapshot_every},
        {"monotone_tolerance", s.warped.monotone_tolerance},
        {"bound_tolerance", s.warped.bound_tolerance}}},
      {"certificate",
       {{"samples", s.plan.samples},
        {"seed", s.plan.seed},
        {"lo", s.plan.lo},
        {"hi", s.plan.hi},
        {"heavy_tail_fraction", s.plan.heavy_tail_fraction}}},
      {"linearization",
       {{"s_values", s.s_values},
        {"scheme", scheme_name(s.scheme)},
        {"cfl_safety", s.proposition_cfl_safety},
        {"gap_tolerance", s.gap_tolerance}}},
      {"expect",
       {{"phi", opt(s.expect_phi)},
        {"phi_tolerance", s.phi_tolerance},
        {"rc_gap", opt(s.expect_rc_gap)},
        {"first_order", s.expect_first_order},
        {"exit", s.expect_exit}}},
  };
}

// ---------------------------------------------------------------------------
// Registry

namespace {

Scenario homogeneous_scenario(std::string name, std::string description, std::string cls,
                              std::array<double, 3> metric) {
  Scenario s;
  s.name = std::move(name);
  s.description = std::move(description);
  s.kind = Kind::Homogeneous;
  s.group = "quick";
  s.milnor_class = std::move(cls);
  s.metric = metric;
  return s;
}

Scenario warped_scenario(std::string name, std::string description, std::string profile, std::size_t grid) {
  Scenario s;
  s.name = std::move(name);
  s.description = std::move(description);
  s.kind = Kind::Warped;
  s.profile = std::move(profile);
  s.grid = grid;
  return s;
}

// alpha and beta of the generic h used on perturbed cylinders.
const std::vector<double> kGenericAlpha{0.3, 0.0, 0.2, 0.1};
const std::vector<double> kGenericBeta{-0.2, 0.15, 0.0, 0.0, 0.0, 0.0, 0.1};

std::vector<Scenario> build_registry() {
  std::vector<Scenario> r;

  auto round = homogeneous_scenario("round-sphere-hrc", "unit round S^3 with h = Rc; Phi stays 1/3", "su2",
                                    {1.0, 1.0, 1.0});
  round.horizon = 0.2;
  round.expect_phi = 1.0 / 3.0;
  r.push_back(round);

  auto berger = homogeneous_scenario("berger-hrc", "Berger sphere (1, 1, 0.3) with h = Rc", "su2", {1.0, 1.0, 0.3});
  berger.expect_rc_gap = 1e-4;
  r.push_back(berger);

  auto random = homogeneous_scenario("berger-random", "Berger sphere (1, 1, 0.5) with random h", "su2",
                                     {1.0, 1.0, 0.5});
  random.h_recipe = "random";
  random.h_seed = 7;
  r.push_back(random);

  auto rho1 = homogeneous_scenario("berger-rho1", "Berger sphere (1, 1, 0.2), random h, rho = 1", "su2",
                                   {1.0, 1.0, 0.2});
  rho1.h_recipe = "random";
  rho1.h_seed = 11;
  rho1.rho = 1.0;
  r.push_back(rho1);

  auto sl2 = homogeneous_scenario("sl2-rho11", "SL(2,R) with R = -10 shifted by rho = 11", "sl2", {1.0, 1.0, 1.0});
  sl2.h_recipe = "custom";
  sl2.h_coefficients = {0.5, -0.3, 0.8};
  sl2.rho = 11.0;
  r.push_back(sl2);

  auto nil = homogeneous_scenario("nil-rho-too-small", "Heisenberg group (R = -2) with rho = 1: rejected", "nil",
                                  {1.0, 1.0, 1.0});
  nil.rho = 1.0;
  nil.expect_exit = 3;
  r.push_back(nil);

  auto cyl = warped_scenario("cylinder-hrc", "round cylinder with h = Rc; Phi stays 1/2", "cylinder", 32);
  cyl.group = "quick";
  cyl.horizon = 0.2;
  cyl.expect_phi = 0.5;
  cyl.phi_tolerance = 1e-6;
  r.push_back(cyl);

  auto pert = warped_scenario("perturbed-cylinder-hrc", "psi = 1 + 0.1 cos x with h = Rc", "perturbed-cylinder", 256);
  pert.expect_rc_gap = 1e-3;
  pert.warped.sample_every = 10;
  r.push_back(pert);

  auto generic = warped_scenario("perturbed-cylinder-generic", "psi = 1 + 0.1 cos x with a generic smooth h",
                                 "perturbed-cylinder", 128);
  generic.group = "quick";
  generic.h_recipe = "custom";
  generic.h_alpha = kGenericAlpha;
  generic.h_beta = kGenericBeta;
  generic.warped.sample_every = 5;
  r.push_back(generic);

  auto generic1 = generic;
  generic1.name = "perturbed-cylinder-rho1";
  generic1.description = "generic h on the perturbed cylinder with rho = 1";
  generic1.group = "full";
  generic1.rho = 1.0;
  r.push_back(generic1);

  auto neck = warped_scenario("neckpinch", "psi = 1 + 0.7 cos x, h = Rc, run into the neckpinch",
                              "perturbed-cylinder", 32);
  neck.amplitude = 0.7;
  neck.horizon = 2.0;
  neck.warped.sample_every = 100;
  neck.warped.max_steps = 200'000;
  r.push_back(neck);

  Scenario cert;
  cert.name = "certify-q";
  cert.description = "sampled nonnegativity of the quartic and of the Hessian minors";
  cert.kind = Kind::Certificate;
  cert.group = "quick";
  r.push_back(cert);

  Scenario var;
  var.name = "variation-ricci";
  var.description = "variation of -2Rc against Lichnerowicz plus gauge term, O(s) study";
  var.kind = Kind::Variation;
  var.group = "quick";
  var.profile = "generic";
  var.grid = 256;
  var.h_recipe = "custom";
  var.h_alpha = {0.2, 0.3};
  var.h_beta = {-0.1, 0.0, 0.1};
  var.s_values = {2e-2, 1e-2, 5e-3};
  var.expect_first_order = true;
  r.push_back(var);

  Scenario prop;
  prop.name = "proposition-cylinder";
  prop.description = "cylinder family psi = 1 + s, one-sided quotient, gap linear in s";
  prop.kind = Kind::Proposition;
  prop.group = "quick";
  prop.profile = "cylinder";
  prop.grid = 64;
  prop.h_recipe = "custom";
  prop.h_beta = {1.0};
  prop.s_values = {1e-2, 5e-3, 2.5e-3};
  prop.scheme = linearization::Scheme::Forward;
  prop.expect_first_order = true;
  r.push_back(prop);

  Scenario propp = prop;
  propp.name = "proposition-perturbed";
  propp.description = "generic family on the perturbed cylinder, central quotient";
  propp.group = "full";
  propp.profile = "generic";
  propp.grid = 128;
  propp.h_alpha = {0.0, 0.1};
  propp.h_beta = {0.5, 0.0, 0.0, 0.0, 0.2};
  propp.s_values = {1e-2, 5e-3};
  propp.scheme = linearization::Scheme::Central;
  propp.expect_first_order = false;
  r.push_back(propp);

  for (const auto& s : r) s.validate();
  return r;
}

}  // namespace

const std::vector<Scenario>& registry() {
  static const std::vector<Scenario> r = build_registry();
  return r;
}

const Scenario& find_scenario(const std::string& name) {
  for (const auto& s : registry())
    if (s.name == name) return s;
  throw ConfigError("unknown scenario '" + name + "'");
}

// ---------------------------------------------------------------------------
// TOML

namespace {

class Section {
 public:
  Section(const toml::table& t, std::string path, std::initializer_list<const char*> allowed) : t_(t), path_(std::move(path)) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto&& [k, v] : t) {
      const std::string key(k.str());
      if (!ok.count(key)) throw ConfigError("unknown key '" + where(key) + "'");
    }
  }

  void number(const char* key, double& out) const {
    if (const auto* n = t_.get(key)) {
      const auto v = n->value<double>();
      if (!v || !(n->is_integer() || n->is_floating_point())) throw type_error(key, "a number");
      out = *v;
    }
  }

  template <class Int>
  void integer(const char* key, Int& out) const {
    if (const auto* n = t_.get(key)) {
      const auto v = n->value_exact<std::int64_t>();
      if (!v) throw type_error(key, "an integer");
      if (*v < 0) throw ConfigError(where(key) + " must be nonnegative");
      out = static_cast<Int>(*v);
    }
  }

  void integer(const char* key, std::optional<std::uint64_t>& out) const {
    if (t_.contains(key)) {
      std::uint64_t v = 0;
      integer(key, v);
      out = v;
    }
  }

  void optional_number(const char* key, std::optional<double>& out) const {
    if (t_.contains(key)) {
      double v = 0.0;
      number(key, v);
      out = v;
    }
  }

  void string(const char* key, std::string& out) const {
    if (const auto* n = t_.get(key)) {
      const auto v = n->value_exact<std::string>();
      if (!v) throw type_error(key, "a string");
      out = *v;
    }
  }

  void boolean(const char* key, bool& out) const {
    if (const auto* n = t_.get(key)) {
      const auto v = n->value_exact<bool>();
      if (!v) throw type_error(key, "a boolean");
      out = *v;
    }
  }

  void numbers(const char* key, std::vector<double>& out) const {
    if (const auto* n = t_.get(key)) {
      const auto* arr = n->as_array();
      if (!arr) throw type_error(key, "an array of numbers");
      std::vector<double> v;
      for (const auto& e : *arr) {
        if (!(e.is_integer() || e.is_floating_point())) throw type_error(key, "an array of numbers");
        v.push_back(*e.value<double>());
      }
      out = std::move(v);
    }
  }

  template <std::size_t N>
  void numbers(const char* key, std::array<double, N>& out) const {
    if (!t_.contains(key)) return;
    std::vector<double> v;
    numbers(key, v);
    if (v.size() != N) throw ConfigError(where(key) + " must have " + std::to_string(N) + " entries");
    std::copy(v.begin(), v.end(), out.begin());
  }

 private:
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  ConfigError type_error(const char* key, const char* what) const {
    return ConfigError(where(key) + " must be " + what);
  }

  const toml::table& t_;
  std::string path_;
};

const toml::table& subtable(const toml::table& root, const char* key) {
  static const toml::table empty;
  const auto* n = root.get(key);
  if (!n) return empty;
  if (!n->is_table()) throw ConfigError(std::string(key) + " must be a table");
  return *n->as_table();
}

}  // namespace

Scenario parse_config(const std::string& toml_text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(toml_text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ": " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(msg.str());
  }

  const Section top(root, "",
                    {"scenario", "name", "description", "kind", "group", "rho", "horizon", "geometry", "h", "controls",
                     "certificate", "linearization", "expect"});
  Scenario s;
  std::string base;
  top.string("scenario", base);
  if (!base.empty()) s = find_scenario(base);
  top.string("name", s.name);
  top.string("description", s.description);
  std::string kind;
  top.string("kind", kind);
  if (!kind.empty()) s.kind = kind_from_string(kind);
  top.string("group", s.group);
  top.number("rho", s.rho);
  top.number("horizon", s.horizon);

  const Section geo(subtable(root, "geometry"), "geometry",
                    {"class", "metric", "profile", "radius", "amplitude", "grid"});
  geo.string("class", s.milnor_class);
  geo.numbers("metric", s.metric);
  geo.string("profile", s.profile);
  geo.number("radius", s.radius);
  geo.number("amplitude", s.amplitude);
  geo.integer("grid", s.grid);

  const Section h(subtable(root, "h"), "h", {"recipe", "coefficients", "alpha", "beta", "seed", "scale"});
  h.string("recipe", s.h_recipe);
  h.numbers("coefficients", s.h_coefficients);
  h.numbers("alpha", s.h_alpha);
  h.numbers("beta", s.h_beta);
  h.integer("seed", s.h_seed);
  h.number("scale", s.h_scale);

  const Section c(subtable(root, "controls"), "controls",
                  {"rtol", "atol", "initial_step", "max_step", "blowup_factor", "cfl_safety", "max_dt", "max_steps",
                   "neckpinch_ratio", "sample_every", "snapshot_every", "monotone_tolerance", "bound_tolerance"});
  c.number("rtol", s.ode.rtol);
  c.number("atol", s.ode.atol);
  c.number("initial_step", s.ode.initial_step);
  c.number("max_step", s.ode.max_step);
  c.number("blowup_factor", s.blowup_factor);
  c.number("cfl_safety", s.warped.cfl_safety);
  c.number("max_dt", s.warped.max_dt);
  c.integer("max_steps", s.warped.max_steps);
  s.ode.max_steps = s.warped.max_steps;
  c.number("neckpinch_ratio", s.warped.neckpinch_ratio);
  c.integer("sample_every", s.warped.sample_every);
  c.number("snapshot_every", s.warped.snapshot_every);
  c.number("monotone_tolerance", s.warped.monotone_tolerance);
  c.number("bound_tolerance", s.warped.bound_tolerance);

  const Section cert(subtable(root, "certificate"), "certificate",
                     {"samples", "seed", "lo", "hi", "heavy_tail_fraction"});
  cert.integer("samples", s.plan.samples);
  cert.integer("seed", s.plan.seed);
  cert.number("lo", s.plan.lo);
  cert.number("hi", s.plan.hi);
  cert.number("heavy_tail_fraction", s.plan.heavy_tail_fraction);

  const Section lin(subtable(root, "linearization"), "linearization",
                    {"s_values", "scheme", "cfl_safety", "gap_tolerance"});
  lin.numbers("s_values", s.s_values);
  std::string scheme = scheme_name(s.scheme);
  lin.string("scheme", scheme);
  if (scheme == "central")
    s.scheme = linearization::Scheme::Central;
  else if (scheme == "forward")
    s.scheme = linearization::Scheme::Forward;
  else
    throw ConfigError("linearization.scheme must be 'central' or 'forward'");
  lin.number("cfl_safety", s.proposition_cfl_safety);
  lin.number("gap_tolerance", s.gap_tolerance);

  const Section ex(subtable(root, "expect"), "expect", {"phi", "phi_tolerance", "rc_gap", "first_order", "exit"});
  ex.optional_number("phi", s.expect_phi);
  ex.number("phi_tolerance", s.phi_tolerance);
  ex.optional_number("rc_gap", s.expect_rc_gap);
  ex.boolean("first_order", s.expect_first_order);
  ex.integer("exit", s.expect_exit);

  s.validate();
  return s;
}

Scenario load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

// ---------------------------------------------------------------------------
// Hashing

std::string git_blob_hash(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr) != 1)
    throw std::runtime_error("SHA-1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string config_hash(const Scenario& s) { return git_blob_hash(to_json(s).dump()); }

// ---------------------------------------------------------------------------
// Execution

namespace {

double x_at(std::size_t j, std::size_t n) {
  return warped::kPeriod * static_cast<double>(j) / static_cast<double>(n);
}

// c0 + sum_m (a_m cos m x + b_m sin m x) from [c0, a1, b1, a2, b2, ...].
double fourier(const std::vector<double>& c, double x) {
  if (c.empty()) return 0.0;
  double v = c[0];
  for (std::size_t i = 1; i < c.size(); ++i) {
    const double m = static_cast<double>((i + 1) / 2);
    v += c[i] * (i % 2 == 1 ? std::cos(m * x) : std::sin(m * x));
  }
  return v;
}

std::vector<double> random_fourier(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> c{scale * u(rng)};
  for (int m = 1; m <= 3; ++m) {
    c.push_back(scale * u(rng) / m);
    c.push_back(scale * u(rng) / m);
  }
  return c;
}

linearization::WarpedMetric build_metric(const Scenario& s) {
  linearization::WarpedMetric g{warped::Field(s.grid), warped::Field(s.grid)};
  for (std::size_t j = 0; j < s.grid; ++j) {
    const double x = x_at(j, s.grid);
    g.f[j] = s.profile == "generic" ? 1.0 + 0.05 * std::sin(x) : 1.0;
    g.psi[j] = s.profile == "cylinder" ? s.radius : s.radius * (1.0 + s.amplitude * std::cos(x));
  }
  return g;
}

// Fourier coefficients of the two h components (or family directions).
std::pair<std::vector<double>, std::vector<double>> h_series(const Scenario& s) {
  if (s.h_recipe == "random") {
    std::mt19937_64 rng(*s.h_seed);
    auto a = random_fourier(rng, s.h_scale);
    auto b = random_fourier(rng, s.h_scale);
    return {a, b};
  }
  return {s.h_alpha, s.h_beta};
}

linearization::VariationField build_variation(const Scenario& s, const linearization::WarpedMetric& g) {
  if (s.h_recipe == "rc") return linearization::ricci(g);
  if (s.h_recipe == "metric") return linearization::VariationField::metric(g);
  const auto [a, b] = h_series(s);
  auto v = linearization::VariationField::zero(s.grid);
  for (std::size_t j = 0; j < s.grid; ++j) {
    v.alpha[j] = fourier(a, x_at(j, s.grid));
    v.beta[j] = fourier(b, x_at(j, s.grid));
  }
  return v;
}

warped::WarpedState build_warped(const Scenario& s) {
  const auto g = build_metric(s);
  warped::WarpedState st;
  st.f = g.f;
  st.psi = g.psi;
  st.rho = s.rho;
  const auto v = build_variation(s, g);
  st.alpha = v.alpha;
  st.beta = v.beta;
  st.validate();
  return st;
}

homogeneous::HomogeneousState build_homogeneous(const Scenario& s) {
  const auto cls = homogeneous::MilnorClass::by_name(s.milnor_class);
  homogeneous::HomogeneousState st;
  st.metric = s.metric;
  st.rho = s.rho;
  if (s.h_recipe == "rc") {
    st.h = homogeneous::ricci_milnor<double>(cls, s.metric).frame;
  } else if (s.h_recipe == "metric") {
    st.h = s.metric;
  } else if (s.h_recipe == "custom") {
    std::copy(s.h_coefficients.begin(), s.h_coefficients.end(), st.h.begin());
  } else {
    std::mt19937_64 rng(*s.h_seed);
    std::uniform_real_distribution<double> u(-s.h_scale, s.h_scale);
    for (auto& c : st.h) c = u(rng);
  }
  return st;
}

class Writer {
 public:
  explicit Writer(RunRecord& rec) : rec_(rec) {}

  std::ofstream open(const fs::path& rel) {
    const fs::path p = rec_.directory / rel;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    rec_.outputs.push_back(p);
    return out;
  }

  void trace(const PinchTrace& t) {
    auto out = open("trace.csv");
    write_csv(out, t);
  }

  void json_file(const fs::path& rel, const json& j) {
    auto out = open(rel);
    out << j.dump(2) << '\n';
  }

  void gaps(const linearization::ResidualReport& r) {
    auto out = open("gap_vs_s.csv");
    out << "s,gap\n";
    char buf[80];
    for (const auto& [s, g] : r.gap_vs_s) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", s, g);
      out << buf;
    }
  }

 private:
  RunRecord& rec_;
};

void check(RunRecord& rec, std::string name, bool passed, std::string detail) {
  rec.assertions.push_back({std::move(name), passed, std::move(detail)});
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

json sample_json(const PinchSample& r) {
  return {{"t", r.t}, {"A", r.A}, {"B", r.B}, {"C", r.C}, {"a", r.a}, {"b", r.b}, {"c", r.c},
          {"R", r.R}, {"Phi", r.Phi}, {"Cbound", r.Cbound}, {"P", r.P}};
}

void phi_expectation(RunRecord& rec, const Scenario& s, const PinchTrace& trace) {
  if (!s.expect_phi) return;
  double worst = 0.0;
  for (const auto& row : trace.rows) worst = std::max(worst, std::abs(row.Phi - *s.expect_phi));
  check(rec, "constant-phi", worst <= s.phi_tolerance,
        fmt("max |Phi - %.12g| = %.3e", *s.expect_phi, worst));
}

void run_homogeneous(const Scenario& s, RunRecord& rec, Writer& w) {
  const auto cls = homogeneous::MilnorClass::by_name(s.milnor_class);
  const auto s0 = build_homogeneous(s);
  homogeneous::IntegrateControls ctl;
  ctl.horizon = s.horizon;
  ctl.ode = s.ode;
  ctl.blowup_factor = s.blowup_factor;
  const auto trace = homogeneous::integrate(cls, s0, ctl);
  w.trace(trace);
  rec.results = summary_json(trace);

  // Pinching bound along the trace; the worst row is the counterexample.
  std::size_t worst_row = 0;
  bool ok = true;
  std::string detail;
  if (s.rho == 0.0) {
    double worst = -INFINITY;
    for (std::size_t k = 1; k < trace.rows.size(); ++k) {
      const double dt = trace.rows[k].t - trace.rows[k - 1].t;
      if (dt <= 0.0) continue;
      const double rate = (trace.rows[k].Phi - trace.rows[k - 1].Phi) / dt;
      if (rate > worst) {
        worst = rate;
        worst_row = k;
      }
    }
    ok = !(worst > s.warped.monotone_tolerance);
    detail = fmt("max dPhi/dt = %.3e (tolerance %.1e)", worst, s.warped.monotone_tolerance);
    rec.results["max_phi_growth_rate"] = std::isfinite(worst) ? json(worst) : json(nullptr);
  } else {
    const double c = trace.sup_cbound();
    const double phi0 = trace.rows.front().Phi;
    double worst = 0.0;
    for (std::size_t k = 0; k < trace.rows.size(); ++k) {
      const double ratio = trace.rows[k].Phi / (phi0 * std::exp(4.0 * c * s.rho * trace.rows[k].t));
      if (ratio > worst) {
        worst = ratio;
        worst_row = k;
      }
    }
    ok = worst <= 1.0 + s.warped.bound_tolerance;
    detail = fmt("max Phi / (Phi(0) exp(4 C rho t)) = %.9f, C = %.6g", worst, c);
    rec.results["max_bound_ratio"] = worst;
  }
  check(rec, "pinching-bound", ok, detail);
  if (!ok) w.json_file("snapshots/counterexample.json", sample_json(trace.rows[worst_row]));

  phi_expectation(rec, s, trace);
  if (s.expect_rc_gap) {
    double gap = 0.0;
    for (const auto& st : homogeneous::integrate_states(cls, s0, ctl)) {
      const auto ric = homogeneous::ricci_milnor<double>(cls, st.metric);
      double num = 0.0, den = 0.0;
      for (int i = 0; i < 3; ++i) {
        num = std::max(num, std::abs(st.h[i] - ric.frame[i]) / st.metric[i]);
        den = std::max(den, std::abs(ric.frame[i]) / st.metric[i]);
      }
      gap = std::max(gap, den > 0.0 ? num / den : num);
    }
    rec.results["max_rc_gap"] = gap;
    check(rec, "rc-tracking", gap < *s.expect_rc_gap, fmt("sup relative |h - Rc| = %.3e", gap));
  }
}

void run_warped(const Scenario& s, RunRecord& rec, Writer& w) {
  warped::WarpedState s0;
  try {
    s0 = build_warped(s);
  } catch (const DomainError& e) {
    throw ConfigError(s.name + ": " + e.what());
  }
  auto controls = s.warped;
  controls.horizon = s.horizon;
  const auto rep = warped::run_max_principle(s0, controls);
  w.trace(rep.trace);
  for (std::size_t k = 0; k < rep.snapshots.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof name, "snapshots/snapshot_%04zu.csv", k);
    auto out = w.open(name);
    warped::write_snapshot_csv(out, rep.snapshots[k]);
  }
  rec.results = summary_json(rep.trace);
  rec.results["worst_growth_rate"] = rep.worst_growth_rate;
  rec.results["worst_bound_ratio"] = rep.worst_bound_ratio;
  if (s.h_recipe == "rc") rec.results["max_rc_gap"] = rep.max_rc_gap;
  rec.results["grid"] = s.grid;

  check(rec, "pinching-bound", rep.passed,
        rep.passed ? (s.rho == 0.0 ? fmt("max dPhi/dt = %.3e", rep.worst_growth_rate)
                                   : fmt("max bound ratio = %.9f", rep.worst_bound_ratio))
                   : rep.failure);
  if (rep.counterexample) {
    auto out = w.open("snapshots/counterexample.csv");
    warped::write_snapshot_csv(out, *rep.counterexample);
  }
  phi_expectation(rec, s, rep.trace);
  if (s.expect_rc_gap)
    check(rec, "rc-tracking", rep.max_rc_gap < *s.expect_rc_gap, fmt("sup relative |h - Rc| = %.3e", rep.max_rc_gap));
}

void run_certificate(const Scenario& s, RunRecord& rec, Writer& w) {
  auto plan = s.plan;
  plan.workers = std::max(1u, std::thread::hardware_concurrency());
  const auto rep = cert::certify(plan);
  rec.results = cert::to_json(rep);
  const double floor = -1e-9;
  const bool ok = rep.status != "violated" && rep.min_q >= floor && rep.min_d1 >= floor && rep.min_d2 >= floor &&
                  rep.min_d3 >= floor;
  check(rec, "nonnegativity", ok, fmt("min_q = %.3e, min minor = %.3e", rep.min_q,
                                      std::min({rep.min_d1, rep.min_d2, rep.min_d3})));
  check(rec, "identities", rep.identity_max_err < 1e-9, fmt("max identity error = %.3e", rep.identity_max_err));
  if (!ok)
    w.json_file("snapshots/counterexample.json",
                {{"r", rep.argmin_q.r}, {"h", rep.argmin_q.h}, {"min_q", rep.min_q}});
}

std::vector<double> halving_ratios(const linearization::ResidualReport& r) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < r.gap_vs_s.size(); ++i)
    out.push_back(r.gap_vs_s[i].second / r.gap_vs_s[i + 1].second);
  return out;
}

void first_order(RunRecord& rec, const Scenario& s, const linearization::ResidualReport& r) {
  if (!s.expect_first_order) return;
  const auto ratios = halving_ratios(r);
  bool ok = !ratios.empty();
  std::string detail = "ratios";
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    // Compare against the ratio of the s values themselves.
    const double expected = r.gap_vs_s[i].first / r.gap_vs_s[i + 1].first;
    ok = ok && std::abs(ratios[i] / expected - 1.0) <= 0.1;
    detail += fmt(" %.4f (expected %.4f)", ratios[i], expected);
  }
  check(rec, "first-order-in-s", ok, detail);
}

void run_variation(const Scenario& s, RunRecord& rec, Writer& w) {
  linearization::WarpedMetric g;
  linearization::VariationField v;
  try {
    g = build_metric(s);
    g.validate();
    v = build_variation(s, g);
  } catch (const DomainError& e) {
    throw ConfigError(s.name + ": " + e.what());
  }
  const auto rep = linearization::variation_of_ricci_study(g, v, s.s_values);
  w.gaps(rep);
  rec.results = linearization::to_json(rep);
  rec.results["ratios"] = halving_ratios(rep);
  const double smallest = rep.gap_vs_s.back().second;
  check(rec, "discrepancy", smallest < s.gap_tolerance,
        fmt("discrepancy %.3e at the smallest s (tolerance %.1e)", smallest, s.gap_tolerance));
  first_order(rec, s, rep);
}

void run_proposition(const Scenario& s, RunRecord& rec, Writer& w) {
  linearization::WarpedMetric g0;
  try {
    g0 = build_metric(s);
    g0.validate();
  } catch (const DomainError& e) {
    throw ConfigError(s.name + ": " + e.what());
  }
  std::vector<double> a, b;
  if (s.h_recipe == "metric") {
    a = b = {1.0};
  } else {
    std::tie(a, b) = h_series(s);
  }
  const std::size_t n = s.grid;
  const linearization::MetricFamily family = [g0, a, b, n](double sv) {
    auto g = g0;
    for (std::size_t j = 0; j < n; ++j) {
      g.f[j] *= 1.0 + sv * fourier(a, x_at(j, n));
      g.psi[j] *= 1.0 + sv * fourier(b, x_at(j, n));
    }
    return g;
  };
  linearization::PropositionControls pc;
  pc.horizon = s.horizon;
  pc.cfl_safety = s.proposition_cfl_safety;
  pc.scheme = s.scheme;
  const auto rep = linearization::proposition_check(family, s.s_values, pc);
  w.gaps(rep);
  rec.results = linearization::to_json(rep);
  rec.results["ratios"] = halving_ratios(rep);
  check(rec, "horizon-reached", rep.complete, fmt("achieved horizon %.6g of %.6g", rep.achieved_horizon, rep.horizon));
  check(rec, "gap", rep.max_gap < s.gap_tolerance,
        fmt("max relative gap %.3e (tolerance %.1e)", rep.max_gap, s.gap_tolerance));
  first_order(rec, s, rep);
}

}  // namespace

json to_json(const RunRecord& r) {
  json assertions = json::array();
  for (const auto& a : r.assertions)
    assertions.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
  json outputs = json::array();
  for (const auto& p : r.outputs) outputs.push_back(p.lexically_relative(r.directory).generic_string());
  return {{"scenario", r.scenario},
          {"config", r.config},
          {"hash", r.hash},
          {"directory", r.directory.generic_string()},
          {"outputs", outputs},
          {"assertions", assertions},
          {"results", r.results},
          {"wall_seconds", r.wall_seconds},
          {"exit_code", static_cast<int>(r.exit)},
          {"error", r.error}};
}

fs::path output_root() {
  if (const char* env = std::getenv("PINCHLAB_OUT"); env && *env) return env;
  return "runs";
}

RunRecord execute(const Scenario& s, const fs::path& root) {
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.scenario = s.name;
  rec.config = to_json(s);
  rec.hash = git_blob_hash(rec.config.dump());
  rec.directory = root / s.name / rec.hash;
  try {
    s.validate();
    fs::create_directories(rec.directory / "snapshots");
    Writer w(rec);
    switch (s.kind) {
      case Kind::Homogeneous: run_homogeneous(s, rec, w); break;
      case Kind::Warped: run_warped(s, rec, w); break;
      case Kind::Certificate: run_certificate(s, rec, w); break;
      case Kind::Variation: run_variation(s, rec, w); break;
      case Kind::Proposition: run_proposition(s, rec, w); break;
    }
    for (const auto& a : rec.assertions)
      if (!a.passed) rec.exit = ExitCode::Assertion;
  } catch (const ConfigError& e) {
    rec.exit = ExitCode::Config;
    rec.error = e.what();
  } catch (const HypothesisError& e) {
    rec.exit = ExitCode::Hypothesis;
    rec.error = e.what();
  } catch (const std::exception& e) {
    rec.exit = ExitCode::Internal;
    rec.error = e.what();
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    fs::create_directories(rec.directory);
    std::ofstream out(rec.directory / "summary.json", std::ios::binary);
    out << to_json(rec).dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write summary.json");
  } catch (const std::exception& e) {
    rec.exit = ExitCode::Internal;
    rec.error += (rec.error.empty() ? "" : "; ") + std::string(e.what());
  }
  return rec;
}

SuiteResult run_suite(const std::string& tier, const fs::path& root, unsigned workers) {
  if (tier != "quick" && tier != "full" && tier != "acceptance")
    throw ConfigError("unknown suite tier '" + tier + "' (expected quick, full or acceptance)");
  const auto start = std::chrono::steady_clock::now();
  SuiteResult res;
  res.tier = tier;
  json entries = json::array();
  bool all_passed = true;

  if (tier == "acceptance") {
    for (const auto& r : acceptance::run_all()) {
      entries.push_back(acceptance::to_json(r));
      all_passed = all_passed && r.passed;
    }
    if (!all_passed) res.exit = ExitCode::Assertion;
  } else {
    std::vector<const Scenario*> selected;
    for (const auto& s : registry())
      if (tier == "full" || s.group == "quick") selected.push_back(&s);
    res.runs.resize(selected.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < selected.size(); i = next++) res.runs[i] = execute(*selected[i], root);
    };
    std::vector<std::thread> pool;
    const unsigned n = std::clamp<unsigned>(workers, 1, static_cast<unsigned>(selected.size()));
    for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    for (std::size_t i = 0; i < selected.size(); ++i) {
      const auto& rec = res.runs[i];
      const bool ok = static_cast<int>(rec.exit) == selected[i]->expect_exit;
      entries.push_back({{"scenario", rec.scenario},
                         {"passed", ok},
                         {"exit_code", static_cast<int>(rec.exit)},
                         {"expected_exit", selected[i]->expect_exit},
                         {"wall_seconds", rec.wall_seconds},
                         {"directory", rec.directory.generic_string()},
                         {"error", rec.error}});
      if (!ok && all_passed) {
        all_passed = false;
        res.exit = rec.exit == ExitCode::Pass ? ExitCode::Assertion : rec.exit;
      }
    }
  }

  res.summary = {{"tier", tier},
                 {"passed", all_passed},
                 {tier == "acceptance" ? "criteria" : "runs", entries},
                 {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
  fs::create_directories(root);
  std::ofstream out(root / ("suite-" + tier + ".json"), std::ios::binary);
  out << res.summary.dump(2) << '\n';
  return res;
}

}  // namespace pinchlab::experiment
