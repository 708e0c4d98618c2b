// Command-line driver for batch edit transfer. Every subcommand loads the
// session file, applies one batch-engine operation and writes it back.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "batchedit/direction.hpp"
#include "batchedit/evaluation.hpp"
#include "batchedit/raster_io.hpp"
#include "batchedit/service.hpp"
#include "batchedit/session.hpp"

namespace fs = std::filesystem;
using namespace batchedit;
using nlohmann::json;

namespace {

int report_error(const std::exception& e) {
  std::cerr << to_api_error(e).to_json().dump() << '\n';
  return 1;
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw NotFound("cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(path + " is not valid JSON: " + e.what());
  }
}

void mutate(const std::string& path, const std::function<Session(Session)>& op) {
  save_session(op(load_session(path)), path);
}

void print_alpha_summary(const Session& s) {
  if (!s.alphas || s.alphas->size() == 0) {
    std::cout << "alphas: none\n";
    return;
  }
  double lo = s.alphas->alphas.front(), hi = lo;
  for (double a : s.alphas->alphas) {
    lo = std::min(lo, a);
    hi = std::max(hi, a);
  }
  std::printf("slider %.6g: %zu alphas in [%.6g, %.6g]\n", s.slider_s, s.alphas->size(), lo, hi);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch latent edit transfer"};
  app.require_subcommand(1);
  std::string session_path = "session.json";
  app.add_option("--session", session_path, "Session file")->capture_default_str();

  // init
  GeneratorShape shape;
  auto* init = app.add_subcommand("init", "Create a new session file");
  init->set_help_flag("--help", "Print this help message and exit");  // frees -h for --h
  init->add_option("--seed", shape.seed, "Generator seed")->capture_default_str();
  init->add_option("--d", shape.d, "Latent dimension")->capture_default_str();
  init->add_option("--h", shape.h, "Hidden width")->capture_default_str();
  init->add_option("--k", shape.k, "Attribute count")->capture_default_str();

  // sample
  long long sample_count = 0;
  std::optional<std::uint64_t> sample_seed;
  auto* sample = app.add_subcommand("sample", "Append standard-normal test latents");
  sample->add_option("-n,--count", sample_count, "Number of latents")->required();
  sample->add_option("--seed", sample_seed, "Sampling seed");

  // edit-example
  std::vector<std::string> edit_attrs, anchors, frees;
  std::vector<double> edit_targets;
  std::optional<std::size_t> start_index;
  std::optional<std::uint64_t> start_seed;
  bool edit_compose = false;
  SolverConfig solver_cfg;
  auto* edit = app.add_subcommand("edit-example", "Produce the example edit with the attribute solver");
  edit->add_option("--attr", edit_attrs, "Attribute to edit (repeatable, paired with --target)")->required();
  edit->add_option("--target", edit_targets, "Target attribute value (repeatable)")->required();
  edit->add_option("--anchor", anchors, "Attribute held at its original value (default for unedited)");
  edit->add_option("--free", frees, "Attribute allowed to drift");
  edit->add_option("--start-index", start_index, "Use this test latent as w0");
  edit->add_option("--start-seed", start_seed, "Sample w0 with this seed");
  edit->add_flag("--compose", edit_compose, "Chain the edit onto the current example end");
  edit->add_option("--steps", solver_cfg.steps)->capture_default_str();
  edit->add_option("--lr", solver_cfg.learning_rate)->capture_default_str();
  edit->add_option("--mu", solver_cfg.proximity)->capture_default_str();

  // import-example / compose
  std::string import_file, compose_file;
  auto* import_cmd = app.add_subcommand("import-example", "Set the example edit from a {start, end} JSON file");
  import_cmd->add_option("file", import_file)->required();
  auto* compose = app.add_subcommand("compose", "Chain a {start, end} edit onto the current example");
  compose->add_option("file", compose_file)->required();

  // fit
  DirectionFitConfig fit_cfg;
  std::optional<double> distance;
  std::string fit_report;
  auto* fit_cmd = app.add_subcommand("fit", "Fit the edit direction from the example");
  fit_cmd->add_option("--lambda", fit_cfg.lambda)->capture_default_str();
  fit_cmd->add_option("--iters", fit_cfg.iterations)->capture_default_str();
  fit_cmd->add_option("--lr", fit_cfg.learning_rate)->capture_default_str();
  fit_cmd->add_option("--weight-decay", fit_cfg.weight_decay)->capture_default_str();
  fit_cmd->add_option("--distance", distance, "Target distance of the edited example from the hyperplane");
  fit_cmd->add_option("--report", fit_report, "Write the loss trace as CSV");

  auto* transfer_cmd = app.add_subcommand("transfer", "Compute per-latent strengths at the current slider");

  double rescale_s = 1.0;
  auto* rescale_cmd = app.add_subcommand("rescale", "Set the slider and recompute all strengths");
  rescale_cmd->add_option("-s", rescale_s, "Slider value")->required();

  // eval
  std::string eval_attr, eval_out, eval_scatter;
  std::optional<double> eval_target;
  auto* eval = app.add_subcommand("eval", "Report attribute spread and linearity");
  eval->add_option("--attr", eval_attr)->required();
  eval->add_option("--target", eval_target, "Target attribute value (default: target state's)");
  eval->add_option("--out", eval_out, "Write per-item CSV");
  eval->add_option("--scatter", eval_scatter, "Write distance/attribute scatter CSV");

  // render
  std::string render_dir, render_format = "png", render_state = "both";
  auto* render_cmd = app.add_subcommand("render", "Render test latents to image files");
  render_cmd->add_option("--out", render_dir)->required();
  render_cmd->add_option("--format", render_format)->check(CLI::IsMember({"pgm", "png"}))->capture_default_str();
  render_cmd->add_option("--state", render_state)->check(CLI::IsMember({"pre", "post", "both"}))->capture_default_str();

  // serve
  int port = default_port();
  std::string host = "127.0.0.1";
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*init) {
      const Session s = create_session(shape);
      save_session(s, session_path);
      std::cout << "created session " << s.id << " in " << session_path << '\n';
    } else if (*sample) {
      json body = {{"count", sample_count}};
      if (sample_seed) body["seed"] = *sample_seed;
      mutate(session_path, [&](Session s) { return requests::add_latents(std::move(s), body); });
    } else if (*edit) {
      if (edit_attrs.size() != edit_targets.size()) throw InvalidArgument("--attr and --target must pair up");
      json body;
      body["targets"] = json::object();
      for (std::size_t i = 0; i < edit_attrs.size(); ++i) body["targets"][edit_attrs[i]] = edit_targets[i];
      if (!anchors.empty()) body["anchors"] = anchors;
      if (!frees.empty()) body["free"] = frees;
      if (start_index) body["start_index"] = *start_index;
      if (start_seed) body["start_seed"] = *start_seed;
      body["compose"] = edit_compose;
      body["solver"] = {{"steps", solver_cfg.steps}, {"lr", solver_cfg.learning_rate}, {"mu", solver_cfg.proximity}};
      Session s = load_session(session_path);
      auto outcome = requests::set_example(std::move(s), body);
      save_session(outcome.session, session_path);
      std::printf("example edit solved: target error %.6g, loss %.6g -> %.6g\n", outcome.solve->target_error,
                  outcome.solve->loss_trace.front(), outcome.solve->loss_trace.back());
    } else if (*import_cmd) {
      const json body = read_json_file(import_file);
      mutate(session_path, [&](Session s) { return requests::set_example(std::move(s), body).session; });
    } else if (*compose) {
      json body = read_json_file(compose_file);
      body["compose"] = true;
      mutate(session_path, [&](Session s) { return requests::set_example(std::move(s), body).session; });
    } else if (*fit_cmd) {
      fit_cfg.target_distance = distance;
      Session s = fit(load_session(session_path), fit_cfg);
      save_session(s, session_path);
      const FitReport& r = *s.last_fit;
      std::printf("fitted |delta*| = %.6g after %zu iterations: L_img %.6g, L_att %.6g, L %.6g (%.3fs)\n",
                  s.direction->magnitude(), r.trace.size(), r.final_loss.img, r.final_loss.att, r.final_loss.total,
                  r.wall_seconds);
      if (!fit_report.empty()) {
        std::ofstream f(fit_report);
        write_fit_csv(f, r);
      }
    } else if (*transfer_cmd) {
      Session s = transfer(load_session(session_path));
      save_session(s, session_path);
      print_alpha_summary(s);
    } else if (*rescale_cmd) {
      Session s = rescale(load_session(session_path), rescale_s);
      save_session(s, session_path);
      print_alpha_summary(s);
    } else if (*eval) {
      const Session s = load_session(session_path);
      const GeneratorParams params = generator_of(s);
      const std::size_t attr = attribute_index(eval_attr, s.generator.k);
      const SpreadReport r = spread(params, s, attr, eval_target);
      const CorrelationReport lin = linearity(params, *s.direction, s.test_latents, attr);
      std::printf("attribute %s, target %.6g\n", eval_attr.c_str(), r.target_value);
      std::printf("  std  pre %.6g  post %.6g  (ratio %.4g)\n", r.pre_std, r.post_std,
                  r.pre_std > 0 ? r.post_std / r.pre_std : 0.0);
      std::printf("  MAE  pre %.6g  post %.6g\n", r.pre_mae, r.post_mae);
      std::printf("  linearity along direction: slope %.6g  intercept %.6g  R^2 %.6g  (n=%zu)\n", lin.slope,
                  lin.intercept, lin.r_squared, lin.samples);
      if (!eval_out.empty()) {
        std::ofstream f(eval_out);
        write_spread_csv(f, s, r);
      }
      if (!eval_scatter.empty()) {
        std::ofstream f(eval_scatter);
        write_scatter_csv(f, scatter(params, *s.direction, s.test_latents, attr));
      }
    } else if (*render_cmd) {
      const Session s = load_session(session_path);
      fs::create_directories(render_dir);
      std::vector<requests::RenderState> states;
      if (render_state != "post") states.push_back(requests::RenderState::pre);
      if (render_state != "pre") states.push_back(requests::RenderState::post);
      for (std::size_t i = 0; i < s.test_latents.size(); ++i) {
        for (auto st : states) {
          const ImageRaster img = requests::render_item(s, i, st);
          char name[64];
          std::snprintf(name, sizeof name, "%05zu_%s.%s", i, st == requests::RenderState::pre ? "pre" : "post",
                        render_format.c_str());
          write_bytes(fs::path(render_dir) / name, render_format == "pgm" ? encode_pgm(img) : encode_png(img));
        }
      }
      std::cout << "rendered " << s.test_latents.size() * states.size() << " images to " << render_dir << '\n';
    } else if (*serve) {
      const fs::path file = fs::absolute(session_path);
      SessionStore store(file.parent_path());
      std::string id;
      if (fs::exists(file)) id = store.adopt(file);
      httplib::Server server;
      register_routes(server, store);
      std::cout << "serving on http://" << host << ':' << port;
      if (!id.empty()) std::cout << " (session " << id << ')';
      std::cout << std::endl;
      if (!server.listen(host, port)) throw Error(ErrorCode::internal, "ListenFailed", "cannot bind port " +
                                                                                             std::to_string(port));
    }
  } catch (const std::exception& e) {
    return report_error(e);
  }
  return 0;
}
