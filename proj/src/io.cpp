#include "labeldist/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "labeldist/bayes_net.hpp"

namespace labeldist {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string double_to_hex(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, bits);
  return buf;
}

double hex_to_double(const std::string& s, const std::string& context) {
  if (s.size() != 16 || s.find_first_not_of("0123456789abcdef") != std::string::npos)
    throw ValidationError(context + ": malformed hex double '" + s + "'");
  std::uint64_t bits = 0;
  for (char c : s) bits = (bits << 4) | static_cast<std::uint64_t>(
                              c <= '9' ? c - '0' : c - 'a' + 10);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream ifs(path, std::ios::binary);
  if (!ifs) throw ValidationError("cannot read file: " + path);
  std::ostringstream oss;
  oss << ifs.rdbuf();
  return oss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream ofs(path, std::ios::binary | std::ios::trunc);
  if (!ofs) throw ValidationError("cannot write file: " + path);
  ofs << content;
  ofs.flush();
  if (!ofs) throw ValidationError("write failed: " + path);
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) {
    if (cur.back() == '\r') cur.pop_back();
    lines.push_back(cur);
  }
  return lines;
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
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

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_double_at(const std::string& s, const std::string& context) {
  const std::string t = trim(s);
  if (t.empty()) throw ValidationError(context + ": empty numeric field");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size())
    throw ValidationError(context + ": malformed number '" + t + "'");
  return v;
}

long long parse_int_at(const std::string& s, const std::string& context) {
  const std::string t = trim(s);
  if (t.empty()) throw ValidationError(context + ": empty integer field");
  char* end = nullptr;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size())
    throw ValidationError(context + ": malformed integer '" + t + "'");
  return v;
}

std::uint64_t parse_u64_at(const std::string& s, const std::string& context) {
  const std::string t = trim(s);
  if (t.empty() || t[0] == '-')
    throw ValidationError(context + ": malformed unsigned integer '" + t + "'");
  char* end = nullptr;
  const std::uint64_t v = std::strtoull(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size())
    throw ValidationError(context + ": malformed unsigned integer '" + t + "'");
  return v;
}

// Shared timed-CSV reader: validates the header and the uniform frame
// spacing, returns the numeric payload rows.
struct TimedCsv {
  int columns = 0;
  double frame_period = 0.040;
  std::vector<std::vector<double>> rows; // payload without the time column
};

TimedCsv read_timed_csv(const std::string& path, const std::string& column_prefix) {
  const std::vector<std::string> lines = split_lines(read_file(path));
  if (lines.empty()) throw ValidationError(path + ": empty file");
  const std::vector<std::string> header = split_fields(lines[0], ',');
  if (header.size() < 2 || header[0] != "time_s")
    throw ValidationError(path + ":1: header must start with 'time_s'");
  const int cols = static_cast<int>(header.size()) - 1;
  for (int i = 0; i < cols; ++i) {
    const std::string expect = column_prefix + std::to_string(i + 1);
    if (header[i + 1] != expect)
      throw ValidationError(path + ":1: expected column '" + expect + "', got '" +
                            header[i + 1] + "'");
  }

  TimedCsv out;
  out.columns = cols;
  std::vector<double> times;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const std::string context = path + ":" + std::to_string(ln + 1);
    const std::vector<std::string> fields = split_fields(lines[ln], ',');
    if (static_cast<int>(fields.size()) != cols + 1)
      throw ValidationError(context + ": expected " + std::to_string(cols + 1) +
                            " fields, got " + std::to_string(fields.size()));
    times.push_back(parse_double_at(fields[0], context));
    std::vector<double> row(cols);
    for (int i = 0; i < cols; ++i) {
      row[i] = parse_double_at(fields[i + 1], context);
      if (!std::isfinite(row[i]))
        throw ValidationError(context + ": non-finite value in column " +
                              std::to_string(i + 1));
    }
    out.rows.push_back(std::move(row));
  }
  if (out.rows.empty()) throw ValidationError(path + ": no data rows");

  if (times.size() >= 2) {
    const double period = times[1] - times[0];
    if (!(period > 0.0))
      throw ValidationError(path + ": times must be strictly increasing");
    for (std::size_t k = 1; k < times.size(); ++k)
      if (std::fabs((times[k] - times[k - 1]) - period) > 1e-6)
        throw ValidationError(path + ":" + std::to_string(k + 2) +
                              ": non-uniform frame spacing");
    out.frame_period = period;
  }
  return out;
}

}  // namespace

// ---- annotation CSV ----

void write_annotation_csv(const std::string& path, const AnnotationMatrix& ann,
                          double frame_period) {
  std::string s = "time_s";
  for (int i = 0; i < ann.annotators(); ++i) s += ",ann_" + std::to_string(i + 1);
  s += '\n';
  for (int t = 0; t < ann.frames(); ++t) {
    s += format_double(t * frame_period);
    for (int i = 0; i < ann.annotators(); ++i) s += ',' + format_double(ann(t, i));
    s += '\n';
  }
  write_file(path, s);
}

AnnotationFile read_annotation_csv(const std::string& path) {
  const TimedCsv csv = read_timed_csv(path, "ann_");
  if (csv.columns < 2)
    throw ValidationError(path + ": needs at least 2 annotator columns");
  return AnnotationFile{AnnotationMatrix::from_rows(csv.rows), csv.frame_period};
}

// ---- feature CSV ----

void write_feature_csv(const std::string& path, const Matrix& features,
                       double frame_period) {
  std::string s = "time_s";
  for (int j = 0; j < features.cols; ++j) s += ",f_" + std::to_string(j + 1);
  s += '\n';
  for (int t = 0; t < features.rows; ++t) {
    s += format_double(t * frame_period);
    for (int j = 0; j < features.cols; ++j) s += ',' + format_double(features(t, j));
    s += '\n';
  }
  write_file(path, s);
}

FeatureFile read_feature_csv(const std::string& path) {
  const TimedCsv csv = read_timed_csv(path, "f_");
  Matrix X(static_cast<int>(csv.rows.size()), csv.columns);
  for (int t = 0; t < X.rows; ++t)
    for (int j = 0; j < X.cols; ++j) X(t, j) = csv.rows[t][j];
  return FeatureFile{std::move(X), csv.frame_period};
}

// ---- loss trace CSV ----

void write_loss_trace_csv(const std::string& path, const std::vector<EpochRow>& trace) {
  std::string s = "epoch,split,ccc_term,bbb_term,kl_term,total\n";
  auto row = [&](int epoch, const char* split, const LossReport& r) {
    s += std::to_string(epoch);
    s += ',';
    s += split;
    s += ',' + format_double(r.ccc_term) + ',' + format_double(r.bbb_term) + ',' +
         format_double(r.kl_term) + ',' + format_double(r.total) + '\n';
  };
  for (const EpochRow& e : trace) {
    row(e.epoch, "train", e.train);
    if (e.has_holdout) row(e.epoch, "holdout", e.holdout);
  }
  write_file(path, s);
}

std::vector<EpochRow> read_loss_trace_csv(const std::string& path) {
  const std::vector<std::string> lines = split_lines(read_file(path));
  if (lines.empty()) throw ValidationError(path + ": empty file");
  if (lines[0] != "epoch,split,ccc_term,bbb_term,kl_term,total")
    throw ValidationError(path + ":1: unexpected loss-trace header");
  std::vector<EpochRow> trace;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const std::string context = path + ":" + std::to_string(ln + 1);
    const std::vector<std::string> f = split_fields(lines[ln], ',');
    if (f.size() != 6) throw ValidationError(context + ": expected 6 fields");
    const int epoch = static_cast<int>(parse_int_at(f[0], context));
    LossReport r;
    r.ccc_term = parse_double_at(f[2], context);
    r.bbb_term = parse_double_at(f[3], context);
    r.kl_term = parse_double_at(f[4], context);
    r.total = parse_double_at(f[5], context);
    if (f[1] == "train") {
      EpochRow e;
      e.epoch = epoch;
      e.train = r;
      trace.push_back(e);
    } else if (f[1] == "holdout") {
      if (trace.empty() || trace.back().epoch != epoch)
        throw ValidationError(context + ": holdout row without matching train row");
      trace.back().holdout = r;
      trace.back().has_holdout = true;
    } else {
      throw ValidationError(context + ": unknown split '" + f[1] + "'");
    }
  }
  return trace;
}

// ---- metrics JSON ----

namespace {

ojson parse_json(const std::string& path) {
  try {
    return ojson::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace

void write_metrics_json(const std::string& path, const MetricReport& report) {
  ojson j;
  j["ccc_m"] = report.ccc_m;
  j["ccc_s"] = report.ccc_s;
  j["kl_eval"] = report.kl_eval;
  j["per_sequence"] = ojson::array();
  for (const SequenceMetrics& sm : report.per_sequence) {
    ojson e;
    e["sequence"] = sm.name;
    e["ccc_m"] = sm.ccc_m;
    e["ccc_s"] = sm.ccc_s;
    e["kl_eval"] = sm.kl_eval;
    j["per_sequence"].push_back(std::move(e));
  }
  write_file(path, j.dump(2) + "\n");
}

MetricReport read_metrics_json(const std::string& path) {
  const ojson j = parse_json(path);
  try {
    MetricReport r;
    r.ccc_m = j.at("ccc_m").get<double>();
    r.ccc_s = j.at("ccc_s").get<double>();
    r.kl_eval = j.at("kl_eval").get<double>();
    for (const auto& e : j.at("per_sequence")) {
      SequenceMetrics sm;
      sm.name = e.at("sequence").get<std::string>();
      sm.ccc_m = e.at("ccc_m").get<double>();
      sm.ccc_s = e.at("ccc_s").get<double>();
      sm.kl_eval = e.at("kl_eval").get<double>();
      r.per_sequence.push_back(std::move(sm));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

// ---- corpus manifest ----

void write_manifest_json(const std::string& path, const CorpusManifest& m) {
  ojson j;
  j["dimension"] = m.dimension;
  j["sequences"] = m.sequences;
  j["frames"] = m.frames;
  j["annotators"] = m.annotators;
  j["feature_dim"] = m.feature_dim;
  j["frame_period"] = m.frame_period;
  j["seed"] = m.seed;
  j["target_mu_m"] = m.target_mu_m;
  j["target_mu_s"] = m.target_mu_s;
  j["achieved_mu_m"] = m.achieved_mu_m;
  j["achieved_mu_s"] = m.achieved_mu_s;
  j["annotation_files"] = m.annotation_files;
  j["feature_files"] = m.feature_files;
  write_file(path, j.dump(2) + "\n");
}

CorpusManifest read_manifest_json(const std::string& path) {
  const ojson j = parse_json(path);
  try {
    CorpusManifest m;
    m.dimension = j.at("dimension").get<std::string>();
    m.sequences = j.at("sequences").get<int>();
    m.frames = j.at("frames").get<int>();
    m.annotators = j.at("annotators").get<int>();
    m.feature_dim = j.at("feature_dim").get<int>();
    m.frame_period = j.at("frame_period").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.target_mu_m = j.at("target_mu_m").get<double>();
    m.target_mu_s = j.at("target_mu_s").get<double>();
    m.achieved_mu_m = j.at("achieved_mu_m").get<double>();
    m.achieved_mu_s = j.at("achieved_mu_s").get<double>();
    m.annotation_files = j.at("annotation_files").get<std::vector<std::string>>();
    m.feature_files = j.at("feature_files").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void save_corpus(const std::string& dir, const Corpus& corpus,
                 CorpusManifest manifest) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create directory: " + dir);
  manifest.annotation_files.clear();
  manifest.feature_files.clear();
  for (std::size_t q = 0; q < corpus.size(); ++q) {
    char base[32];
    std::snprintf(base, sizeof base, "seq_%02d", static_cast<int>(q) + 1);
    const std::string ann_name = std::string(base) + "_annotations.csv";
    const std::string feat_name = std::string(base) + "_features.csv";
    write_annotation_csv((fs::path(dir) / ann_name).string(), corpus[q].ann,
                         corpus[q].frame_period);
    write_feature_csv((fs::path(dir) / feat_name).string(), corpus[q].features,
                      corpus[q].frame_period);
    manifest.annotation_files.push_back(ann_name);
    manifest.feature_files.push_back(feat_name);
  }
  write_manifest_json((fs::path(dir) / "manifest.json").string(), manifest);
}

Corpus load_corpus(const std::string& dir) {
  const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
  const CorpusManifest m = read_manifest_json(manifest_path);
  if (m.annotation_files.size() != m.feature_files.size())
    throw ValidationError(manifest_path +
                          ": annotation_files and feature_files lengths differ");
  if (m.annotation_files.empty())
    throw ValidationError(manifest_path + ": manifest lists no sequences");
  Corpus corpus;
  for (std::size_t q = 0; q < m.annotation_files.size(); ++q) {
    const std::string ann_path = (fs::path(dir) / m.annotation_files[q]).string();
    const std::string feat_path = (fs::path(dir) / m.feature_files[q]).string();
    AnnotationFile af = read_annotation_csv(ann_path);
    FeatureFile ff = read_feature_csv(feat_path);
    if (ff.features.rows != af.ann.frames())
      throw ValidationError(feat_path + ": frame count differs from " + ann_path);
    if (std::fabs(ff.frame_period - af.frame_period) > 1e-6)
      throw ValidationError(feat_path + ": frame period differs from " + ann_path);
    std::string name = m.annotation_files[q];
    const std::string suffix = "_annotations.csv";
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      name.resize(name.size() - suffix.size());
    corpus.push_back(
        Sequence{std::move(ff.features), std::move(af.ann), af.frame_period, name});
  }
  return corpus;
}

// ---- checkpoint ----

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string s = "labeldist checkpoint v1\n";
  s += "loss_variant " + std::string(loss_variant_name(ckpt.loss_variant)) + '\n';
  s += "n_passes " + std::to_string(ckpt.n_passes) + '\n';
  char hex[24];
  std::snprintf(hex, sizeof hex, "%016" PRIx64, ckpt.cfg_hash);
  s += "cfg_hash " + std::string(hex) + '\n';
  s += "prior_sigma " + double_to_hex(ckpt.net.prior_sigma) + '\n';
  s += "layers " + std::to_string(ckpt.net.layers.size()) + '\n';
  for (std::size_t l = 0; l < ckpt.net.layers.size(); ++l) {
    const VariationalLayer& layer = ckpt.net.layers[l];
    s += "layer " + std::to_string(l) + ' ' + std::to_string(layer.out()) + ' ' +
         std::to_string(layer.in()) + '\n';
    auto matrix_block = [&](const char* tag, const Matrix& mat) {
      s += tag;
      s += '\n';
      for (int u = 0; u < mat.rows; ++u) {
        for (int k = 0; k < mat.cols; ++k) {
          if (k) s += ' ';
          s += double_to_hex(mat(u, k));
        }
        s += '\n';
      }
    };
    auto vector_block = [&](const char* tag, const std::vector<double>& vec) {
      s += tag;
      s += '\n';
      for (std::size_t u = 0; u < vec.size(); ++u) {
        if (u) s += ' ';
        s += double_to_hex(vec[u]);
      }
      s += '\n';
    };
    matrix_block("mu_w", layer.mu_w);
    matrix_block("rho_w", layer.rho_w);
    vector_block("mu_b", layer.mu_b);
    vector_block("rho_b", layer.rho_b);
  }
  write_file(path, s);
}

Checkpoint read_checkpoint(const std::string& path) {
  const std::string text = read_file(path);
  const std::string magic = "labeldist checkpoint v1\n";
  if (text.compare(0, magic.size(), magic) != 0)
    throw ValidationError(path + ": not a labeldist checkpoint (bad magic line)");
  std::istringstream in(text.substr(magic.size()));
  auto next = [&](const char* expect) {
    std::string tok;
    if (!(in >> tok)) throw ValidationError(path + ": truncated checkpoint");
    if (expect && tok != expect)
      throw ValidationError(path + ": expected '" + expect + "', got '" + tok + "'");
    return tok;
  };
  auto next_any = [&]() {
    std::string tok;
    if (!(in >> tok)) throw ValidationError(path + ": truncated checkpoint");
    return tok;
  };
  auto next_int = [&](const char* what) {
    const std::string tok = next_any();
    return static_cast<int>(parse_int_at(tok, path + " (" + what + ")"));
  };

  Checkpoint ckpt;
  next("loss_variant");
  ckpt.loss_variant = loss_variant_from_name(next_any());
  next("n_passes");
  ckpt.n_passes = next_int("n_passes");
  next("cfg_hash");
  {
    const std::string tok = next_any();
    if (tok.size() != 16 ||
        tok.find_first_not_of("0123456789abcdef") != std::string::npos)
      throw ValidationError(path + ": malformed cfg_hash");
    ckpt.cfg_hash = 0;
    for (char c : tok)
      ckpt.cfg_hash = (ckpt.cfg_hash << 4) |
                      static_cast<std::uint64_t>(c <= '9' ? c - '0' : c - 'a' + 10);
  }
  next("prior_sigma");
  ckpt.net.prior_sigma = hex_to_double(next_any(), path + " (prior_sigma)");
  next("layers");
  const int L = next_int("layers");
  if (L < 1 || L > 1024) throw ValidationError(path + ": implausible layer count");
  for (int l = 0; l < L; ++l) {
    next("layer");
    const int idx = next_int("layer index");
    if (idx != l) throw ValidationError(path + ": layer blocks out of order");
    const int out = next_int("layer rows");
    const int in = next_int("layer cols");
    if (out < 1 || in < 1) throw ValidationError(path + ": bad layer shape");
    VariationalLayer layer;
    layer.mu_w = Matrix(out, in);
    layer.rho_w = Matrix(out, in);
    layer.mu_b.assign(out, 0.0);
    layer.rho_b.assign(out, 0.0);
    auto fill_matrix = [&](const char* tag, Matrix& mat) {
      next(tag);
      for (int u = 0; u < mat.rows; ++u)
        for (int k = 0; k < mat.cols; ++k)
          mat(u, k) = hex_to_double(next_any(), path + " (" + tag + ")");
    };
    auto fill_vector = [&](const char* tag, std::vector<double>& vec) {
      next(tag);
      for (double& v : vec) v = hex_to_double(next_any(), path + " (" + tag + ")");
    };
    fill_matrix("mu_w", layer.mu_w);
    fill_matrix("rho_w", layer.rho_w);
    fill_vector("mu_b", layer.mu_b);
    fill_vector("rho_b", layer.rho_b);
    ckpt.net.layers.push_back(std::move(layer));
  }
  std::string extra;
  if (in >> extra)
    throw ValidationError(path + ": trailing content after last layer");
  for (int l = 0; l + 1 < L; ++l)
    if (ckpt.net.layers[l + 1].in() != ckpt.net.layers[l].out())
      throw ValidationError(path + ": layer shapes do not chain");
  if (ckpt.net.layers.back().out() != 1)
    throw ValidationError(path + ": output layer must have one unit");
  return ckpt;
}

// ---- config file ----

TrainConfig parse_config_text(const std::string& text, const std::string& context) {
  TrainConfig cfg;
  const std::vector<std::string> lines = split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string line = lines[ln];
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = context + ":" + std::to_string(ln + 1);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(where + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "learning_rate") {
      cfg.learning_rate = parse_double_at(value, where);
    } else if (key == "batch_size") {
      cfg.batch_size = static_cast<int>(parse_int_at(value, where));
    } else if (key == "sequence_length") {
      cfg.sequence_length = static_cast<int>(parse_int_at(value, where));
    } else if (key == "epochs") {
      cfg.epochs = static_cast<int>(parse_int_at(value, where));
    } else if (key == "n_passes") {
      cfg.n_passes = static_cast<int>(parse_int_at(value, where));
    } else if (key == "seed") {
      cfg.seed = parse_u64_at(value, where);
    } else if (key == "loss_variant") {
      try {
        cfg.loss_variant = loss_variant_from_name(value);
      } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
      }
    } else if (key == "hidden") {
      cfg.hidden.clear();
      if (!value.empty())
        for (const std::string& piece : split_fields(value, ','))
          cfg.hidden.push_back(static_cast<int>(parse_int_at(piece, where)));
    } else if (key == "prior_sigma") {
      cfg.prior_sigma = parse_double_at(value, where);
    } else if (key == "likelihood_sigma") {
      cfg.likelihood_sigma = parse_double_at(value, where);
    } else if (key == "holdout_sequences") {
      cfg.holdout_sequences = static_cast<int>(parse_int_at(value, where));
    } else if (key == "select_on") {
      if (value == "train")
        cfg.select_on = SelectOn::train;
      else if (value == "holdout")
        cfg.select_on = SelectOn::holdout;
      else
        throw ValidationError(where + ": select_on must be 'train' or 'holdout'");
    } else {
      throw ValidationError(where + ": unknown config key '" + key + "'");
    }
  }
  validate_config(cfg);
  return cfg;
}

TrainConfig read_config(const std::string& path) {
  return parse_config_text(read_file(path), path);
}

void write_config(const std::string& path, const TrainConfig& cfg) {
  write_file(path, config_canonical(cfg));
}

}  // namespace labeldist
