// craft command-line interface.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "craft/checkpoint.hpp"
#include "craft/config.hpp"
#include "craft/dataset.hpp"
#include "craft/error.hpp"
#include "craft/train.hpp"

namespace fs = std::filesystem;
using namespace craft;

namespace {

constexpr const char* kWorldFile = "world.json";

HotelWorld load_data(const std::string& dir) {
  const fs::path path = fs::path(dir) / kWorldFile;
  if (!fs::exists(path)) throw NotFoundError("no " + std::string(kWorldFile) + " in " + dir);
  return read_world(path);
}

TrainConfig load_train_config(const std::string& path) {
  return path.empty() ? TrainConfig{} : train_config_from_map(read_config_file(path));
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CRAFT cross-future-behavior demand forecasting"};
  app.require_subcommand(1);

  std::string config, data, out, checkpoint, split = "test", report;
  std::uint64_t seed = 1;
  int seeds = 5;
  int pmax = 7;
  int stride = 7;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic hotel world");
  gen->add_option("--config", config, "world config file");
  gen->add_option("--seed", seed, "world seed")->required();
  gen->add_option("--out", out, "output data directory")->required();

  auto* tr = app.add_subcommand("train", "Train CRAFT");
  tr->add_option("--config", config, "train config file")->required();
  tr->add_option("--data", data, "data directory")->required();
  tr->add_option("--out", out, "run directory")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  ev->add_option("--data", data, "data directory")->required();
  ev->add_option("--split", split, "train|val|test")->required();
  ev->add_option("--report", report, "report file")->required();

  auto* ab = app.add_subcommand("ablate", "Train the four ablation variants");
  ab->add_option("--config", config, "train config file")->required();
  ab->add_option("--data", data, "data directory")->required();
  ab->add_option("--seeds", seeds, "training seeds per variant")->required();
  ab->add_option("--out", out, "table file")->required();

  auto* bl = app.add_subcommand("baseline", "Train and evaluate the label-only DLinear baseline");
  bl->add_option("--config", config, "train config file")->required();
  bl->add_option("--data", data, "data directory")->required();
  bl->add_option("--report", report, "report file")->required();

  auto* dg = app.add_subcommand("diagnose", "Diagnostics");
  dg->require_subcommand(1);
  auto* pe = dg->add_subcommand("pearson", "Look-back label vs. observed CFB correlation by horizon");
  pe->add_option("--data", data, "data directory")->required();
  pe->add_option("--pmax", pmax, "largest horizon window")->required();
  pe->add_option("--out", out, "output file")->required();
  pe->add_option("--config", config, "train config file (window lengths)");
  pe->add_option("--stride", stride, "days between sampled origins");

  auto* ex = app.add_subcommand("export", "Write the samples of one split as NDJSON");
  ex->add_option("--config", config, "train config file");
  ex->add_option("--data", data, "data directory")->required();
  ex->add_option("--split", split, "train|val|test");
  ex->add_option("--out", out, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      const WorldConfig wc = config.empty() ? WorldConfig{} : world_config_from_map(read_config_file(config));
      wc.validate();
      const HotelWorld w = generate_world(wc, seed);
      fs::create_directories(out);
      write_world(w, fs::path(out) / kWorldFile);
      write_text(fs::path(out) / "world.cfg", to_config_text(wc));
      std::cout << "generated " << w.hotels.size() << " hotels over " << w.horizon << " days, "
                << w.events.size() << " events\n";
    } else if (*tr) {
      TrainConfig cfg = load_train_config(config);
      cfg.data_dir = data;
      const HotelWorld w = load_data(data);
      const DataView view = DataView::make(w, cfg);
      for (const std::string& msg : view.split.warnings) std::cerr << "warning: " << msg << "\n";
      TrainResult res = train(view, cfg);
      std::cerr << "parameters " << res.history.parameter_count << "\n";
      fs::create_directories(out);
      save_checkpoint(fs::path(out) / "model.ckpt", cfg, res.params);
      write_text(fs::path(out) / "history.txt", res.history.to_text());
      if (res.history.aborted) {
        std::cerr << "training aborted: " << res.history.abort_reason << "\n";
        return 4;
      }
    } else if (*ev) {
      Checkpoint ck = load_checkpoint(checkpoint);
      const HotelWorld w = load_data(data);
      const DataView view = DataView::make(w, ck.config);
      const MetricReport rep = evaluate(ck.params, view, ck.config, parse_split(split));
      write_text(report, rep.to_json().dump(2) + "\n");
    } else if (*ab) {
      const TrainConfig cfg = load_train_config(config);
      const HotelWorld w = load_data(data);
      const DataView view = DataView::make(w, cfg);
      write_text(out, ablation_table(run_ablation(view, cfg, seeds)));
    } else if (*bl) {
      const TrainConfig cfg = load_train_config(config);
      const HotelWorld w = load_data(data);
      const DataView view = DataView::make(w, cfg);
      write_text(report, baseline_dlinear(view, cfg, Split::test).to_json().dump(2) + "\n");
    } else if (*pe) {
      TrainConfig cfg = load_train_config(config);
      if (stride < 1) throw ConfigError("stride must be positive");
      const HotelWorld w = load_data(data);
      std::vector<ForecastSample> samples;
      const std::vector<std::int32_t> origins = valid_origins(w, cfg.L, cfg.P);
      for (std::size_t k = 0; k < origins.size(); k += static_cast<std::size_t>(stride)) {
        for (const Hotel& h : w.hotels) samples.push_back(build_sample(w, h.hotel_id, origins[k], cfg.L, cfg.P));
      }
      const std::vector<double> corr = pearson_by_horizon(samples, pmax);
      std::ostringstream os;
      os.precision(10);
      os << "p\tpearson\n";
      for (std::size_t p = 0; p < corr.size(); ++p) os << p + 1 << "\t" << corr[p] << "\n";
      write_text(out, os.str());
    } else if (*ex) {
      const TrainConfig cfg = load_train_config(config);
      const HotelWorld w = load_data(data);
      const DataView view = DataView::make(w, cfg);
      std::vector<ForecastSample> samples;
      for (std::int32_t t : view.origins(parse_split(split))) {
        for (const Hotel& h : w.hotels) samples.push_back(build_sample(w, h.hotel_id, t, cfg.L, cfg.P));
      }
      write_dataset(samples, out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
