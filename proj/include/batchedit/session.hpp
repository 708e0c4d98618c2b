#pragma once

// Session lifecycle for batch edit transfer.
//
// A session owns one example edit, the direction fitted from it, a list of
// test latents and the per-latent strengths that move every test latent onto
// the hyperplane through the target state w₀ + s·Δ*. Operations take a
// session by value and return the updated one.

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "batchedit/direction.hpp"
#include "batchedit/error.hpp"
#include "batchedit/generator.hpp"
#include "batchedit/latent.hpp"

namespace batchedit {

inline constexpr int kSessionFormatVersion = 1;

/// Tolerance for "second edit starts where the first ended".
inline constexpr double kChainTolerance = 1e-9;

struct Session {
  std::string id;
  GeneratorShape generator;
  std::optional<EditPair> example;
  std::optional<EditDirection> direction;
  std::vector<LatentCode> test_latents;
  double slider_s = 1.0;
  std::optional<AlphaAssignment> alphas;
  std::string created;
  std::string modified;
  // Not persisted.
  std::optional<FitReport> last_fit;

  [[nodiscard]] std::size_t dim() const noexcept { return generator.d; }
};

namespace detail {

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::atomic<std::uint64_t>& session_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

inline void touch(Session& s) { s.modified = utc_timestamp(); }

inline void check_invariants(const Session& s) {
  if (s.alphas) {
    if (!s.direction) throw InvalidArgument("session has alphas without a direction");
    if (s.alphas->size() != s.test_latents.size()) {
      throw InvalidArgument("session alpha count does not match test latent count");
    }
  }
  if (!std::isfinite(s.slider_s)) throw InvalidArgument("slider value must be finite");
}

}  // namespace detail

/// Ids are unique within a process and reproducible across runs: "s<seed>-<n>".
inline std::string next_session_id(std::uint64_t seed) {
  const std::uint64_t n = ++detail::session_counter();
  std::ostringstream os;
  os << 's' << seed << '-' << n;
  return os.str();
}

inline Session create_session(const GeneratorShape& shape = {}) {
  validate(shape);
  Session s;
  s.id = next_session_id(shape.seed);
  s.generator = shape;
  s.created = detail::utc_timestamp();
  s.modified = s.created;
  return s;
}

inline GeneratorParams generator_of(const Session& s) { return init_generator(s.generator); }

inline Session set_example_edit(Session s, EditPair pair) {
  detail::require_same_dim(pair.dim(), s.dim(), "set_example_edit");
  s.example = std::move(pair);
  s.direction.reset();
  s.alphas.reset();
  s.last_fit.reset();
  detail::touch(s);
  return s;
}

/// Keeps only the final state: (w₀, w'₀) then (w'₀, w''₀) becomes (w₀, w''₀).
inline Session compose_edits(Session s, const EditPair& second) {
  if (!s.example) throw MissingExample();
  detail::require_same_dim(second.dim(), s.dim(), "compose_edits");
  const double gap = (second.start.values() - s.example->end.values()).norm();
  if (!(gap <= kChainTolerance)) {
    throw ChainBroken("second edit starts " + std::to_string(gap) + " away from the current example end");
  }
  EditPair composed(s.example->start, second.end);
  return set_example_edit(std::move(s), std::move(composed));
}

inline Session add_test_latents(Session s, std::span<const LatentCode> latents) {
  for (std::size_t i = 0; i < latents.size(); ++i) {
    if (latents[i].dim() != s.dim()) {
      throw DimensionMismatch("test latent " + std::to_string(i) + " has dimension " +
                              std::to_string(latents[i].dim()) + ", expected " + std::to_string(s.dim()));
    }
  }
  s.test_latents.insert(s.test_latents.end(), latents.begin(), latents.end());
  s.alphas.reset();
  detail::touch(s);
  return s;
}

inline Session fit(Session s, const DirectionFitConfig& cfg = {}) {
  if (!s.example) throw MissingExample();
  FitResult result = fit_direction(generator_of(s), *s.example, cfg);
  s.direction = std::move(result.direction);
  s.last_fit = std::move(result.report);
  s.alphas.reset();
  detail::touch(s);
  return s;
}

/// w₀ + s·Δ*
inline LatentCode target_state(const Session& s, double slider) {
  if (!s.direction) throw MissingDirection();
  if (!s.example) throw MissingExample();
  return LatentCode(Vector(s.example->start.values() + slider * s.direction->delta()));
}

inline Session transfer(Session s) {
  if (!s.direction) throw MissingDirection();
  if (s.test_latents.empty()) throw NoTestLatents();
  s.alphas = batch_alphas(target_state(s, s.slider_s), s.test_latents, *s.direction);
  detail::touch(s);
  return s;
}

/// Re-solves every α for a new slider value. The direction is never touched.
inline Session rescale(Session s, double slider) {
  if (!s.direction) throw MissingDirection();
  if (!std::isfinite(slider)) throw InvalidArgument("slider value must be finite");
  s.slider_s = slider;
  s.alphas = batch_alphas(target_state(s, slider), s.test_latents, *s.direction);
  detail::touch(s);
  return s;
}

inline LatentCode edited_latent(const Session& s, std::size_t index) {
  if (!s.alphas) throw MissingAlphas();
  if (index >= s.test_latents.size()) throw NotFound("test latent index " + std::to_string(index) + " out of range");
  return apply_edit(s.test_latents[index], (*s.alphas)[index], *s.direction);
}

inline std::vector<LatentCode> edited_latents(const Session& s) {
  if (!s.alphas) throw MissingAlphas();
  std::vector<LatentCode> out;
  out.reserve(s.test_latents.size());
  for (std::size_t i = 0; i < s.test_latents.size(); ++i) {
    out.push_back(apply_edit(s.test_latents[i], (*s.alphas)[i], *s.direction));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson vector_json(const Vector& v) {
  ojson arr = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline Vector vector_from_json(const nlohmann::json& j, std::size_t d, std::string_view what) {
  if (!j.is_array()) throw InvalidArgument(std::string(what) + " must be an array of numbers");
  if (j.size() != d) {
    throw DimensionMismatch(std::string(what) + " has " + std::to_string(j.size()) + " entries, expected " +
                            std::to_string(d));
  }
  Vector v(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    if (!j[i].is_number()) throw InvalidArgument(std::string(what) + " must contain only numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

template <typename T>
T required(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw InvalidArgument(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidArgument(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace detail

inline nlohmann::ordered_json pair_to_json(const EditPair& p) {
  nlohmann::ordered_json j;
  j["start"] = detail::vector_json(p.start.values());
  j["end"] = detail::vector_json(p.end.values());
  return j;
}

inline EditPair pair_from_json(const nlohmann::json& j, std::size_t d) {
  if (!j.is_object()) throw InvalidArgument("edit pair must be an object with 'start' and 'end'");
  if (!j.contains("start") || !j.contains("end")) throw InvalidArgument("edit pair needs 'start' and 'end'");
  return EditPair(LatentCode(detail::vector_from_json(j["start"], d, "start")),
                  LatentCode(detail::vector_from_json(j["end"], d, "end")));
}

/// Field order is fixed so files diff cleanly.
inline nlohmann::ordered_json to_json(const Session& s, bool include_timestamps = true) {
  nlohmann::ordered_json j;
  j["version"] = kSessionFormatVersion;
  j["id"] = s.id;
  j["generator"] = {{"seed", s.generator.seed}, {"d", s.generator.d}, {"h", s.generator.h}, {"k", s.generator.k}};
  j["example"] = s.example ? pair_to_json(*s.example) : nlohmann::ordered_json(nullptr);
  if (s.direction) {
    j["direction"] = {{"delta", detail::vector_json(s.direction->delta())}};
  } else {
    j["direction"] = nullptr;
  }
  j["slider_s"] = s.slider_s;
  nlohmann::ordered_json tests = nlohmann::ordered_json::array();
  for (const auto& w : s.test_latents) tests.push_back(detail::vector_json(w.values()));
  j["test_latents"] = std::move(tests);
  j["alphas"] = s.alphas ? nlohmann::ordered_json(s.alphas->alphas) : nlohmann::ordered_json(nullptr);
  if (include_timestamps) {
    j["created"] = s.created;
    j["modified"] = s.modified;
  }
  return j;
}

inline Session session_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidArgument("session document must be a JSON object");
  const int version = detail::required<int>(j, "version");
  if (version != kSessionFormatVersion) {
    throw InvalidArgument("unsupported session version " + std::to_string(version));
  }
  Session s;
  s.id = detail::required<std::string>(j, "id");
  const auto& g = j.contains("generator") ? j["generator"] : throw InvalidArgument("missing field 'generator'");
  s.generator = GeneratorShape{detail::required<std::uint64_t>(g, "seed"), detail::required<std::size_t>(g, "d"),
                               detail::required<std::size_t>(g, "h"), detail::required<std::size_t>(g, "k")};
  validate(s.generator);
  const std::size_t d = s.generator.d;

  if (j.contains("example") && !j["example"].is_null()) s.example = pair_from_json(j["example"], d);
  if (j.contains("direction") && !j["direction"].is_null()) {
    const auto& dj = j["direction"];
    if (!dj.is_object() || !dj.contains("delta")) throw InvalidArgument("direction must be an object with 'delta'");
    s.direction = normalize(detail::vector_from_json(dj["delta"], d, "direction.delta"));
  }
  s.slider_s = detail::required<double>(j, "slider_s");
  if (j.contains("test_latents")) {
    const auto& tl = j["test_latents"];
    if (!tl.is_array()) throw InvalidArgument("test_latents must be an array");
    s.test_latents.reserve(tl.size());
    for (const auto& w : tl) s.test_latents.emplace_back(detail::vector_from_json(w, d, "test latent"));
  }
  if (j.contains("alphas") && !j["alphas"].is_null()) {
    const auto& aj = j["alphas"];
    if (!aj.is_array()) throw InvalidArgument("alphas must be an array");
    AlphaAssignment a;
    for (const auto& x : aj) {
      if (!x.is_number()) throw InvalidArgument("alphas must contain only numbers");
      a.alphas.push_back(x.get<double>());
      if (!std::isfinite(a.alphas.back())) throw InvalidArgument("alphas must be finite");
    }
    s.alphas = std::move(a);
  }
  s.created = j.value("created", std::string{});
  s.modified = j.value("modified", s.created);
  detail::check_invariants(s);
  return s;
}

inline std::string serialize(const Session& s, bool include_timestamps = true) {
  return to_json(s, include_timestamps).dump(2) + "\n";
}

inline Session parse_session(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("session file is not valid JSON: ") + e.what());
  }
  return session_from_json(j);
}

inline void save_session(const Session& s, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::internal, "IoError", "cannot write " + tmp.string());
    f << serialize(s);
  }
  std::filesystem::rename(tmp, path);
}

inline Session load_session(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NotFound("session file " + path.string() + " not found");
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_session(buf.str());
}

}  // namespace batchedit
