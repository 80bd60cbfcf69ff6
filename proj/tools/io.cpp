#include "io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "riskshare/error.hpp"

namespace riskshare::io {
namespace {

// Field-path aware accessors; every failure names the offending path.
class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    throw InputError(source_ + ": " + (path.empty() ? "/" : path) + ": " + what);
  }

  void expect_object(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) const {
    if (!j.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : j.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) fail(path + "/" + key, "unknown field");
    }
  }

  const Json& field(const Json& j, const std::string& path, const char* key) const {
    const auto it = j.find(key);
    if (it == j.end()) fail(path + "/" + key, "missing required field");
    return *it;
  }

  double number(const Json& j, const std::string& path) const {
    if (!j.is_number()) fail(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(path, "number is not finite");
    return v;
  }

  std::size_t positive_int(const Json& j, const std::string& path) const {
    if (!j.is_number_integer() || j.get<long long>() < 1) fail(path, "expected a positive integer");
    return j.get<std::size_t>();
  }

  const Json& array(const Json& j, const std::string& path) const {
    if (!j.is_array()) fail(path, "expected an array");
    return j;
  }

  Point point(const Json& j, const std::string& path, std::size_t dim) const {
    array(j, path);
    if (j.size() != dim) {
      fail(path, "expected " + std::to_string(dim) + " coordinates, got " + std::to_string(j.size()));
    }
    Point x(dim);
    for (std::size_t k = 0; k < dim; ++k) x[k] = number(j[k], path + "/" + std::to_string(k));
    return x;
  }

  void version(const Json& doc) const {
    const auto it = doc.find("version");
    if (it != doc.end() && !(it->is_number_integer() && it->get<long long>() == kFormatVersion)) {
      fail("/version", "unsupported version");
    }
  }

  [[nodiscard]] const std::string& source() const { return source_; }

 private:
  std::string source_;
};

// Library validation errors become schema errors on the document.
template <class F>
auto guarded(const Reader& r, const std::string& path, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    r.fail(path, e.what());
  }
}

}  // namespace

Json parse_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    std::size_t col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t k = 0; k < end; ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    // Drop nlohmann's own "[id] parse error at line L, column C: " prefix.
    std::string what = e.what();
    if (const auto pos = what.find(": ", what.find("parse error")); pos != std::string::npos) what = what.substr(pos + 2);
    throw InputError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON: " + what);
  }
}

Json read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path.string() + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), path.string());
}

DiscreteMeasure measure_from_json(const Json& doc, const std::string& source, const std::optional<BallConfig>& ball) {
  const Reader r(source);
  r.expect_object(doc, "", {"version", "dim", "atoms"});
  r.version(doc);
  const std::size_t dim = r.positive_int(r.field(doc, "", "dim"), "/dim");
  const Json& atoms = r.array(r.field(doc, "", "atoms"), "/atoms");
  std::vector<Atom> raw;
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    const std::string p = "/atoms/" + std::to_string(k);
    r.expect_object(atoms[k], p, {"x", "w"});
    raw.push_back({r.point(r.field(atoms[k], p, "x"), p + "/x", dim), r.number(r.field(atoms[k], p, "w"), p + "/w")});
  }
  return guarded(r, "/atoms", [&] { return validate_measure(std::move(raw), ball); });
}

JointLaw joint_law_from_json(const Json& doc, const std::string& source, const std::optional<BallConfig>& ball) {
  const Reader r(source);
  r.expect_object(doc, "", {"version", "agents", "dim", "atoms"});
  r.version(doc);
  const std::size_t agents = r.positive_int(r.field(doc, "", "agents"), "/agents");
  const std::size_t dim = r.positive_int(r.field(doc, "", "dim"), "/dim");
  const Json& atoms = r.array(r.field(doc, "", "atoms"), "/atoms");
  std::vector<TupleAtom> raw;
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    const std::string p = "/atoms/" + std::to_string(k);
    r.expect_object(atoms[k], p, {"x", "w"});
    const Json& x = r.array(r.field(atoms[k], p, "x"), p + "/x");
    if (x.size() != agents) {
      r.fail(p + "/x", "expected " + std::to_string(agents) + " agent points, got " + std::to_string(x.size()));
    }
    TupleAtom t;
    for (std::size_t i = 0; i < agents; ++i) t.x.push_back(r.point(x[i], p + "/x/" + std::to_string(i), dim));
    t.w = r.number(r.field(atoms[k], p, "w"), p + "/w");
    raw.push_back(std::move(t));
  }
  return guarded(r, "/atoms", [&] { return validate_joint_law(std::move(raw), ball); });
}

StrictlyConvexProfile profile_from_json(const Json& doc, const std::string& source) {
  const Reader r(source);
  r.expect_object(doc, "", {"version", "agents", "dim", "profiles"});
  r.version(doc);
  const std::size_t agents = r.positive_int(r.field(doc, "", "agents"), "/agents");
  const std::size_t dim = r.positive_int(r.field(doc, "", "dim"), "/dim");
  const Json& profiles = r.array(r.field(doc, "", "profiles"), "/profiles");
  if (profiles.size() != agents) {
    r.fail("/profiles", "expected " + std::to_string(agents) + " entries, got " + std::to_string(profiles.size()));
  }
  std::vector<AgentProfile> out;
  for (std::size_t i = 0; i < agents; ++i) {
    const std::string p = "/profiles/" + std::to_string(i);
    const Json& e = profiles[i];
    r.expect_object(e, p, {"eps", "pieces", "floor_matrix"});
    AgentProfile a;
    a.eps = r.number(r.field(e, p, "eps"), p + "/eps");
    if (!(a.eps > 0.0)) r.fail(p + "/eps", "must be positive");
    if (const auto it = e.find("pieces"); it != e.end()) {
      r.array(*it, p + "/pieces");
      for (std::size_t k = 0; k < it->size(); ++k) {
        const std::string q = p + "/pieces/" + std::to_string(k);
        r.expect_object((*it)[k], q, {"a", "b"});
        a.pieces.push_back(
            {r.point(r.field((*it)[k], q, "a"), q + "/a", dim), r.number(r.field((*it)[k], q, "b"), q + "/b")});
      }
    }
    if (const auto it = e.find("floor_matrix"); it != e.end()) {
      r.array(*it, p + "/floor_matrix");
      if (it->size() != dim) r.fail(p + "/floor_matrix", "expected " + std::to_string(dim) + " rows");
      Eigen::MatrixXd m(dim, dim);
      for (std::size_t row = 0; row < dim; ++row) {
        const Point v = r.point((*it)[row], p + "/floor_matrix/" + std::to_string(row), dim);
        for (std::size_t c = 0; c < dim; ++c) m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(c)) = v[c];
      }
      a.floor_matrix = m;
    }
    out.push_back(std::move(a));
  }
  return guarded(r, "/profiles", [&] { return StrictlyConvexProfile(dim, std::move(out)); });
}

Json to_json(const DiscreteMeasure& m) {
  Json atoms = Json::array();
  for (const auto& a : m.atoms()) atoms.push_back({{"x", a.x}, {"w", a.w}});
  return {{"version", kFormatVersion}, {"dim", m.dim()}, {"atoms", std::move(atoms)}};
}

Json to_json(const JointLaw& law) {
  Json atoms = Json::array();
  for (const auto& a : law.atoms()) atoms.push_back({{"x", a.x}, {"w", a.w}});
  return {{"version", kFormatVersion}, {"agents", law.agents()}, {"dim", law.dim()}, {"atoms", std::move(atoms)}};
}

Json to_json(const StrictlyConvexProfile& psi) {
  Json profiles = Json::array();
  for (const auto& a : psi.all()) {
    Json e{{"eps", a.eps}};
    Json pieces = Json::array();
    for (const auto& pc : a.pieces) pieces.push_back({{"a", pc.slope}, {"b", pc.intercept}});
    e["pieces"] = std::move(pieces);
    if (a.floor_matrix) {
      Json rows = Json::array();
      for (Eigen::Index r = 0; r < a.floor_matrix->rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < a.floor_matrix->cols(); ++c) row.push_back((*a.floor_matrix)(r, c));
        rows.push_back(std::move(row));
      }
      e["floor_matrix"] = std::move(rows);
    }
    profiles.push_back(std::move(e));
  }
  return {{"version", kFormatVersion}, {"agents", psi.agents()}, {"dim", psi.dim()}, {"profiles", std::move(profiles)}};
}

std::string dump(const Json& doc) { return doc.dump(); }

}  // namespace riskshare::io
