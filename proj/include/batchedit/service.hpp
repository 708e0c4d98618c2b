#pragma once

// Operational surface shared by the CLI and the HTTP service: a file-backed
// session store, JSON request handling, and the HTTP routes.

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>

#include "batchedit/direction.hpp"
#include "batchedit/error.hpp"
#include "batchedit/evaluation.hpp"
#include "batchedit/generator.hpp"
#include "batchedit/raster_io.hpp"
#include "batchedit/session.hpp"
#include "batchedit/solver.hpp"

// After Eigen: httplib pulls in <resolv.h>, whose _res macro breaks Eigen.
#include <httplib.h>

namespace batchedit {

struct ApiError {
  ErrorCode code = ErrorCode::internal;
  std::string message;
  std::string detail;

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["code"] = std::string(to_string(code));
    j["message"] = message;
    if (!detail.empty()) j["detail"] = detail;
    return {{"error", j}};
  }
};

inline ApiError to_api_error(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return ApiError{err->code(), err->what(), err->kind()};
  if (dynamic_cast<const nlohmann::json::exception*>(&e) != nullptr) {
    return ApiError{ErrorCode::bad_request, e.what(), "JsonError"};
  }
  return ApiError{ErrorCode::internal, e.what(), {}};
}

inline constexpr int kDefaultPort = 8080;

/// Port from BATCHEDIT_PORT, falling back to 8080.
inline int default_port() {
  if (const char* env = std::getenv("BATCHEDIT_PORT")) {
    try {
      const int p = std::stoi(env);
      if (p > 0 && p < 65536) return p;
    } catch (const std::exception&) {
    }
  }
  return kDefaultPort;
}

// ---------------------------------------------------------------------------
// Requests. Both the CLI and the HTTP routes build these JSON bodies and
// hand them to the functions below, which only call batch-engine operations.

namespace requests {

inline std::uint64_t default_sample_seed(const Session& s) {
  return s.generator.seed * 1000003ULL + s.test_latents.size() + 1;
}

inline std::uint64_t default_start_seed(const Session& s) { return s.generator.seed * 1000003ULL + 999331ULL; }

/// {"latents": [[...], ...]} or {"count": N, "seed": S}
inline Session add_latents(Session s, const nlohmann::json& body) {
  if (body.contains("latents")) {
    const auto& arr = body["latents"];
    if (!arr.is_array()) throw InvalidArgument("'latents' must be an array of latent arrays");
    std::vector<LatentCode> latents;
    latents.reserve(arr.size());
    for (const auto& w : arr) latents.emplace_back(detail::vector_from_json(w, s.dim(), "latent"));
    return add_test_latents(std::move(s), latents);
  }
  if (!body.contains("count")) throw InvalidArgument("body needs 'latents' or 'count'");
  const auto count = detail::required<std::int64_t>(body, "count");
  if (count < 0) throw InvalidArgument("count must be >= 0");
  const std::uint64_t seed = body.contains("seed") ? detail::required<std::uint64_t>(body, "seed")
                                                   : default_sample_seed(s);
  const auto latents = sample_latents(seed, static_cast<std::size_t>(count), s.dim());
  return add_test_latents(std::move(s), latents);
}

inline SolverConfig solver_config(const nlohmann::json& body) {
  SolverConfig cfg;
  if (body.contains("solver")) {
    const auto& j = body["solver"];
    cfg.steps = j.value("steps", cfg.steps);
    cfg.learning_rate = j.value("lr", cfg.learning_rate);
    cfg.proximity = j.value("mu", cfg.proximity);
  }
  return cfg;
}

inline EditTarget edit_target(const nlohmann::json& body, std::size_t k) {
  EditTarget target(k);
  const auto& targets = body["targets"];
  if (!targets.is_object() || targets.empty()) throw InvalidArgument("'targets' must map attribute names to values");
  for (const auto& [name, value] : targets.items()) {
    if (!value.is_number()) throw InvalidArgument("target for '" + name + "' must be a number");
    target.target(attribute_index(name, k), value.get<double>());
  }
  for (const char* key : {"anchors", "free"}) {
    if (!body.contains(key)) continue;
    const auto& list = body[key];
    if (!list.is_array()) throw InvalidArgument(std::string("'") + key + "' must be an array of attribute names");
    for (const auto& name : list) {
      const std::size_t idx = attribute_index(name.get<std::string>(), k);
      if (std::string_view(key) == "anchors") {
        target.anchor(idx);
      } else {
        target.free(idx);
      }
    }
  }
  return target;
}

inline LatentCode edit_start(const Session& s, const nlohmann::json& body) {
  if (body.value("compose", false)) {
    if (!s.example) throw MissingExample();
    return s.example->end;
  }
  if (body.contains("start")) return LatentCode(detail::vector_from_json(body["start"], s.dim(), "start"));
  if (body.contains("start_index")) {
    const auto idx = detail::required<std::size_t>(body, "start_index");
    if (idx >= s.test_latents.size()) throw NotFound("start_index " + std::to_string(idx) + " out of range");
    return s.test_latents[idx];
  }
  const std::uint64_t seed = body.contains("start_seed") ? detail::required<std::uint64_t>(body, "start_seed")
                                                         : default_start_seed(s);
  return sample_latents(seed, 1, s.dim()).front();
}

struct ExampleOutcome {
  Session session;
  std::optional<SolveResult> solve;
};

/// Raw pair {"start", "end"} or solver request {"targets", "anchors", "free", ...}.
/// With "compose": true the new edit is chained onto the current example.
inline ExampleOutcome set_example(Session s, const nlohmann::json& body) {
  if (!body.is_object()) throw InvalidArgument("example body must be a JSON object");
  const bool compose = body.value("compose", false);
  if (body.contains("targets")) {
    const GeneratorParams params = generator_of(s);
    const LatentCode start = edit_start(s, body);
    SolveResult solved = solve_edit(params, start, edit_target(body, s.generator.k), solver_config(body));
    Session next = compose ? compose_edits(std::move(s), solved.pair) : set_example_edit(std::move(s), solved.pair);
    return {std::move(next), std::move(solved)};
  }
  EditPair pair = pair_from_json(body, s.dim());
  return {compose ? compose_edits(std::move(s), pair) : set_example_edit(std::move(s), std::move(pair)), std::nullopt};
}

inline DirectionFitConfig fit_config(const nlohmann::json& body) {
  DirectionFitConfig cfg;
  if (body.is_null()) return cfg;
  if (!body.is_object()) throw InvalidArgument("fit body must be a JSON object");
  cfg.lambda = body.value("lambda", cfg.lambda);
  cfg.iterations = body.value("iterations", cfg.iterations);
  cfg.learning_rate = body.value("lr", cfg.learning_rate);
  cfg.weight_decay = body.value("weight_decay", cfg.weight_decay);
  cfg.batch_size = body.value("batch_size", cfg.batch_size);
  if (body.contains("distance") && !body["distance"].is_null()) cfg.target_distance = body["distance"].get<double>();
  return cfg;
}

inline nlohmann::ordered_json evaluation_json(const Session& s, std::size_t attr, std::optional<double> target) {
  const GeneratorParams params = generator_of(s);
  const SpreadReport r = spread(params, s, attr, target);
  const CorrelationReport lin = linearity(params, *s.direction, s.test_latents, attr);
  nlohmann::ordered_json j;
  j["attribute"] = attr < kAttributeNames.size() ? std::string(kAttributeNames[attr]) : std::to_string(attr);
  j["target_value"] = r.target_value;
  j["spread"] = {{"pre_std", r.pre_std}, {"post_std", r.post_std}, {"pre_mae", r.pre_mae}, {"post_mae", r.post_mae}};
  j["linearity"] = {{"slope", lin.slope},
                    {"intercept", lin.intercept},
                    {"r_squared", lin.r_squared},
                    {"samples", lin.samples},
                    {"degenerate", lin.degenerate}};
  j["pre"] = r.pre;
  j["post"] = r.post;
  return j;
}

enum class RenderState { pre, post };

inline RenderState parse_render_state(std::string_view s) {
  if (s.empty() || s == "post") return RenderState::post;
  if (s == "pre") return RenderState::pre;
  throw InvalidArgument("state must be 'pre' or 'post'");
}

inline ImageRaster render_item(const Session& s, std::size_t index, RenderState state) {
  if (index >= s.test_latents.size()) throw NotFound("test latent index " + std::to_string(index) + " out of range");
  const GeneratorParams params = generator_of(s);
  if (state == RenderState::pre) return render_latent(params, s.test_latents[index]);
  return render_latent(params, edited_latent(s, index));
}

}  // namespace requests

// ---------------------------------------------------------------------------

/// One JSON file per session plus an in-memory cache. Mutations of a session
/// are serialised; reads get a consistent snapshot.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  Session create(const GeneratorShape& shape) {
    std::lock_guard lock(map_mu_);
    Session s = create_session(shape);
    while (entries_.count(s.id) != 0 || std::filesystem::exists(path_for(s.id))) s.id = next_session_id(shape.seed);
    auto entry = std::make_shared<Entry>();
    entry->path = path_for(s.id);
    save_session(s, entry->path);
    entry->session = s;
    entries_.emplace(s.id, std::move(entry));
    return s;
  }

  /// Register an existing session file under its id.
  std::string adopt(const std::filesystem::path& file) {
    Session s = load_session(file);
    std::lock_guard lock(map_mu_);
    auto entry = std::make_shared<Entry>();
    entry->path = file;
    entry->session = s;
    entries_[s.id] = std::move(entry);
    return s.id;
  }

  [[nodiscard]] Session get(const std::string& id) const {
    auto entry = find(id);
    std::shared_lock lock(entry->mu);
    return entry->session;
  }

  Session update(const std::string& id, const std::function<Session(Session)>& op) {
    auto entry = find(id);
    std::unique_lock lock(entry->mu);
    Session next = op(entry->session);
    save_session(next, entry->path);
    entry->session = next;
    return next;
  }

  [[nodiscard]] const std::filesystem::path& directory() const noexcept { return dir_; }

 private:
  struct Entry {
    mutable std::shared_mutex mu;
    Session session;
    std::filesystem::path path;
  };

  [[nodiscard]] std::filesystem::path path_for(const std::string& id) const { return dir_ / (id + ".json"); }

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::lock_guard lock(map_mu_);
    if (auto it = entries_.find(id); it != entries_.end()) return it->second;
    const bool safe_id = !id.empty() && id.find_first_of("/\\.") == std::string::npos;
    if (safe_id && std::filesystem::exists(path_for(id))) {
      auto entry = std::make_shared<Entry>();
      entry->path = path_for(id);
      entry->session = load_session(entry->path);
      entries_.emplace(id, entry);
      return entry;
    }
    throw NotFound("session '" + id + "' not found");
  }

  std::filesystem::path dir_;
  mutable std::mutex map_mu_;
  mutable std::map<std::string, std::shared_ptr<Entry>> entries_;
};

// ---------------------------------------------------------------------------
// HTTP

namespace detail {

inline void send_error(httplib::Response& res, const ApiError& err) {
  res.status = http_status(err.code);
  res.set_content(err.to_json().dump(), "application/json");
}

inline void send_json(httplib::Response& res, const nlohmann::ordered_json& j) {
  res.status = 200;
  res.set_content(j.dump(), "application/json");
}

template <typename Handler>
auto guarded(Handler handler) {
  return [handler = std::move(handler)](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const std::exception& e) {
      send_error(res, to_api_error(e));
    }
  };
}

inline nlohmann::json body_json(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("request body is not valid JSON: ") + e.what());
  }
}

inline std::size_t parse_index(const std::string& text) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw NotFound("index '" + text + "' is not a valid item index");
  }
}

}  // namespace detail

inline void register_routes(httplib::Server& server, SessionStore& store) {
  using detail::guarded;
  using detail::send_json;
  using nlohmann::json;
  using Req = httplib::Request;
  using Res = httplib::Response;

  server.Post("/sessions", guarded([&store](const Req& req, Res& res) {
                const json body = detail::body_json(req);
                GeneratorShape shape;
                shape.seed = body.value("seed", shape.seed);
                shape.d = body.value("d", shape.d);
                shape.h = body.value("h", shape.h);
                shape.k = body.value("k", shape.k);
                send_json(res, to_json(store.create(shape)));
              }));

  server.Get(R"(/sessions/([^/]+))", guarded([&store](const Req& req, Res& res) {
               send_json(res, to_json(store.get(req.matches[1])));
             }));

  server.Post(R"(/sessions/([^/]+)/example)", guarded([&store](const Req& req, Res& res) {
                const json body = detail::body_json(req);
                send_json(res, to_json(store.update(req.matches[1], [&](Session s) {
                  return requests::set_example(std::move(s), body).session;
                })));
              }));

  server.Post(R"(/sessions/([^/]+)/latents)", guarded([&store](const Req& req, Res& res) {
                const json body = detail::body_json(req);
                send_json(res, to_json(store.update(req.matches[1], [&](Session s) {
                  return requests::add_latents(std::move(s), body);
                })));
              }));

  server.Post(R"(/sessions/([^/]+)/fit)", guarded([&store](const Req& req, Res& res) {
                const DirectionFitConfig cfg = requests::fit_config(detail::body_json(req));
                send_json(res, to_json(store.update(req.matches[1], [&](Session s) { return fit(std::move(s), cfg); })));
              }));

  server.Post(R"(/sessions/([^/]+)/transfer)", guarded([&store](const Req& req, Res& res) {
                send_json(res, to_json(store.update(req.matches[1], [](Session s) { return transfer(std::move(s)); })));
              }));

  server.Post(R"(/sessions/([^/]+)/rescale)", guarded([&store](const Req& req, Res& res) {
                const json body = detail::body_json(req);
                if (!body.contains("s") || !body["s"].is_number()) throw InvalidArgument("body needs numeric 's'");
                const double s_value = body["s"].get<double>();
                send_json(res, to_json(store.update(req.matches[1], [&](Session s) {
                  return rescale(std::move(s), s_value);
                })));
              }));

  server.Get(R"(/sessions/([^/]+)/alphas)", guarded([&store](const Req& req, Res& res) {
               const Session s = store.get(req.matches[1]);
               nlohmann::ordered_json j;
               j["id"] = s.id;
               j["slider_s"] = s.slider_s;
               j["alphas"] = s.alphas ? nlohmann::ordered_json(s.alphas->alphas) : nlohmann::ordered_json(nullptr);
               send_json(res, j);
             }));

  server.Get(R"(/sessions/([^/]+)/render/([^/]+))", guarded([&store](const Req& req, Res& res) {
               const Session s = store.get(req.matches[1]);
               const std::size_t index = detail::parse_index(req.matches[2]);
               const auto state = requests::parse_render_state(req.get_param_value("state"));
               const auto png = encode_png(requests::render_item(s, index, state));
               res.status = 200;
               res.set_content(std::string(png.begin(), png.end()), "image/png");
             }));

  server.Get(R"(/sessions/([^/]+)/eval)", guarded([&store](const Req& req, Res& res) {
               const Session s = store.get(req.matches[1]);
               if (!req.has_param("attr")) throw InvalidArgument("query parameter 'attr' is required");
               const std::size_t attr = attribute_index(req.get_param_value("attr"), s.generator.k);
               std::optional<double> target;
               if (req.has_param("target")) {
                 try {
                   target = std::stod(req.get_param_value("target"));
                 } catch (const std::exception&) {
                   throw InvalidArgument("target must be a number");
                 }
               }
               send_json(res, requests::evaluation_json(s, attr, target));
             }));
}

}  // namespace batchedit
