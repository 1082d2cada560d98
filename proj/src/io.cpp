#include "fedshap/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fedshap {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

std::string join_selected(const std::vector<int>& selected) {
  std::string out;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (i) out += ";";
    out += std::to_string(selected[i]);
  }
  return out;
}

std::string sv_to_json(const std::map<int, double>& sv) {
  ordered_json j = ordered_json::object();
  for (const auto& [client, value] : sv) {
    j[std::to_string(client)] = value;
  }
  return j.dump();
}

// RFC 4180 row splitter; handles quoted fields with doubled quotes.
std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

}  // namespace

void write_round_records_csv(std::ostream& out, const std::vector<RoundRecord>& records) {
  out << "t,selected,val_loss,test_loss,test_acc,sv_json,utility_evals,ms\n";
  for (const auto& rec : records) {
    out << rec.round << ',' << csv_escape(join_selected(rec.selected)) << ','
        << format_double(rec.val_loss_after) << ',' << format_double(rec.test_loss)
        << ',' << format_double(rec.test_accuracy) << ','
        << csv_escape(sv_to_json(rec.round_sv)) << ',' << rec.utility_evals << ','
        << format_double(rec.elapsed_ms) << '\n';
  }
}

std::string round_records_to_csv(const std::vector<RoundRecord>& records) {
  std::ostringstream os;
  write_round_records_csv(os, records);
  return os.str();
}

std::vector<RoundRecord> read_round_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IngestError("empty records file " + path);
  const std::string expected = "t,selected,val_loss,test_loss,test_acc,sv_json,utility_evals,ms";
  if (line != expected) {
    throw IngestError("unexpected header in " + path + ": " + line);
  }
  std::vector<RoundRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_row(line);
    if (fields.size() != 8) {
      throw IngestError(path + ":" + std::to_string(line_no) +
                        ": expected 8 fields, got " + std::to_string(fields.size()));
    }
    RoundRecord rec;
    try {
      rec.round = std::stoi(fields[0]);
      if (!fields[1].empty()) {
        std::stringstream ss(fields[1]);
        std::string token;
        while (std::getline(ss, token, ';')) rec.selected.push_back(std::stoi(token));
      }
      rec.val_loss_after = std::stod(fields[2]);
      rec.test_loss = std::stod(fields[3]);
      rec.test_accuracy = std::stod(fields[4]);
      const auto sv = nlohmann::json::parse(fields[5]);
      for (const auto& [key, value] : sv.items()) {
        rec.round_sv[std::stoi(key)] = value.get<double>();
      }
      rec.utility_evals = std::stol(fields[6]);
      rec.elapsed_ms = std::stod(fields[7]);
    } catch (const std::exception& e) {
      throw IngestError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string config_to_json(const SimConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  j["num_clients"] = cfg.num_clients;
  j["budget"] = cfg.budget;
  j["rounds"] = cfg.rounds;
  j["strategy"] = {
      {"kind", to_string(cfg.strategy.kind)},
      {"ucb_c", cfg.strategy.ucb_c},
      {"softmax_beta", cfg.strategy.softmax_beta},
      {"poc_query_size", cfg.strategy.poc_query_size},
      {"poc_decay", cfg.strategy.poc_decay},
  };
  j["train"] = {
      {"epochs", cfg.train.epochs},
      {"batches_per_epoch", cfg.train.batches_per_epoch},
      {"learning_rate", cfg.train.learning_rate},
      {"momentum", cfg.train.momentum},
      {"prox_mu", cfg.train.prox_mu},
  };
  j["partition"] = {
      {"dirichlet_alpha", cfg.partition.dirichlet_alpha},
      {"size_law", to_string(cfg.partition.size_law)},
  };
  j["perturb"] = {
      {"straggler_fraction", cfg.perturb.straggler_fraction},
      {"noise_scale", cfg.perturb.noise_scale},
  };
  j["gtg"] = {
      {"epsilon", cfg.gtg.epsilon},
      {"max_iters", cfg.gtg.max_iters},
      {"convergence_window", cfg.gtg.convergence_window},
      {"convergence_tol", cfg.gtg.convergence_tol},
      {"exhaustive", cfg.gtg.exhaustive},
  };
  j["sv_mode"] = cfg.sv_mode == SvMode::mean ? "mean" : "exp";
  j["exp_alpha"] = cfg.exp_alpha;
  j["data"] = {
      {"source", to_string(cfg.data.source)},
      {"data_dir", cfg.data.data_dir},
      {"classes", cfg.data.classes},
      {"dim", cfg.data.dim},
      {"train_samples", cfg.data.train_samples},
      {"eval_samples", cfg.data.eval_samples},
      {"separation", cfg.data.separation},
  };
  j["hidden_dims"] = cfg.hidden_dims;
  j["use_exact_sv"] = cfg.use_exact_sv;
  j["threads"] = cfg.threads;
  return j.dump(2) + "\n";
}

std::string config_hash(const SimConfig& cfg) {
  const std::string canonical = config_to_json(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path write_run_result(const std::filesystem::path& out_dir,
                                       const RunResult& result) {
  const std::filesystem::path run_dir = out_dir / ("run-" + config_hash(result.config));
  std::filesystem::create_directories(run_dir);
  {
    std::ofstream csv(run_dir / "records.csv", std::ios::binary);
    if (!csv) throw IngestError("cannot write " + (run_dir / "records.csv").string());
    write_round_records_csv(csv, result.records);
  }
  {
    std::ofstream json(run_dir / "config.json", std::ios::binary);
    if (!json) throw IngestError("cannot write " + (run_dir / "config.json").string());
    json << config_to_json(result.config);
  }
  return run_dir;
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_accuracy_svg(const std::vector<PlotSeries>& series) {
  if (series.empty()) throw InputError("plot: no series to draw");
  const double width = 860.0, height = 520.0;
  const double left = 70.0, right = 30.0, top = 30.0, bottom = 60.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  std::size_t max_rounds = 1;
  for (const auto& s : series) {
    if (s.accuracy.empty()) throw InputError("plot: series " + s.label + " is empty");
    max_rounds = std::max(max_rounds, s.accuracy.size());
  }
  const double x_max = static_cast<double>(max_rounds - 1);
  const auto x_of = [&](double t) {
    return left + (x_max > 0 ? t / x_max : 0.5) * plot_w;
  };
  const auto y_of = [&](double acc) { return top + (1.0 - acc) * plot_h; };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
     << "\">\n";
  os << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
     << "\" fill=\"white\"/>\n";
  // axes
  os << "  <line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\""
     << left + plot_w << "\" y2=\"" << top + plot_h
     << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  os << "  <line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left
     << "\" y2=\"" << top + plot_h << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  // y ticks every 0.2
  for (int i = 0; i <= 5; ++i) {
    const double acc = 0.2 * i;
    char label[16];
    std::snprintf(label, sizeof label, "%.1f", acc);
    os << "  <line x1=\"" << left - 4 << "\" y1=\"" << y_of(acc) << "\" x2=\"" << left
       << "\" y2=\"" << y_of(acc) << "\" stroke=\"black\"/>\n";
    os << "  <text x=\"" << left - 8 << "\" y=\"" << y_of(acc) + 4
       << "\" font-size=\"12\" text-anchor=\"end\">" << label << "</text>\n";
  }
  // x ticks: 5 evenly spaced rounds
  for (int i = 0; i <= 4; ++i) {
    const double t = x_max * i / 4.0;
    os << "  <line x1=\"" << x_of(t) << "\" y1=\"" << top + plot_h << "\" x2=\""
       << x_of(t) << "\" y2=\"" << top + plot_h + 4 << "\" stroke=\"black\"/>\n";
    os << "  <text x=\"" << x_of(t) << "\" y=\"" << top + plot_h + 18
       << "\" font-size=\"12\" text-anchor=\"middle\">"
       << static_cast<long>(t + 0.5) << "</text>\n";
  }
  os << "  <text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 16
     << "\" font-size=\"14\" text-anchor=\"middle\">communication round</text>\n";
  os << "  <text x=\"18\" y=\"" << top + plot_h / 2
     << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << top + plot_h / 2 << ")\">test accuracy</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof kPalette / sizeof kPalette[0])];
    os << "  <polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t t = 0; t < series[s].accuracy.size(); ++t) {
      if (t) os << ' ';
      os << x_of(static_cast<double>(t)) << ',' << y_of(series[s].accuracy[t]);
    }
    os << "\"/>\n";
    const double ly = top + 16.0 + 18.0 * static_cast<double>(s);
    os << "  <line x1=\"" << left + plot_w - 150 << "\" y1=\"" << ly - 4 << "\" x2=\""
       << left + plot_w - 126 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
       << "\" stroke-width=\"1.5\"/>\n";
    os << "  <text x=\"" << left + plot_w - 120 << "\" y=\"" << ly
       << "\" font-size=\"12\">" << xml_escape(series[s].label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace fedshap
