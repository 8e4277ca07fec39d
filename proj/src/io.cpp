#include "pf/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <functional>
#include <sstream>
#include <system_error>
#include <unistd.h>

namespace pf {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'P', 'F', 'W', 'D', 'U', 'M', 'P', '\0'};

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorKind::CorruptDump, "corrupt dump: " + what); }

// The payload is stored in host order, which must be little-endian.
static_assert(std::endian::native == std::endian::little, "dump encoding assumes a little-endian host");

template <typename T>
void put_le(std::string& out, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T get_le(std::string_view in, std::size_t offset) {
  T v;
  std::memcpy(&v, in.data() + offset, sizeof(T));
  return v;
}

void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::string_view in, std::size_t offset) {
  return std::bit_cast<double>(get_le<std::uint64_t>(in, offset));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw Error(ErrorKind::Configuration,
              "config key '" + std::string(key) + "': cannot read '" + std::string(value) + "' as " + expected);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view v) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const PinnConfig&)> get;
  std::function<void(PinnConfig&, std::string_view)> set;
};

template <typename Int>
Field int_field(const char* key, Int PinnConfig::*member) {
  return {key, [member](const PinnConfig& c) { return std::to_string(c.*member); },
          [key, member](PinnConfig& c, std::string_view v) { c.*member = to_int<Int>(key, v); }};
}

Field double_field(const char* key, double PinnConfig::*member) {
  return {key, [member](const PinnConfig& c) { return format_double(c.*member); },
          [key, member](PinnConfig& c, std::string_view v) { c.*member = to_double(key, v); }};
}

Field bound_field(const char* key, Interval PinnConfig::*interval, double Interval::*end) {
  return {key, [=](const PinnConfig& c) { return format_double(c.*interval.*end); },
          [=](PinnConfig& c, std::string_view v) { c.*interval.*end = to_double(key, v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      int_field("hidden_layers", &PinnConfig::hidden_layers),
      int_field("width", &PinnConfig::width),
      {"activation", [](const PinnConfig& c) { return std::string(to_string(c.activation)); },
       [](PinnConfig& c, std::string_view v) {
         try {
           c.activation = parse_activation(v);
         } catch (const Error&) {
           bad_value("activation", v, "tanh, relu or identity");
         }
       }},
      double_field("nu", &PinnConfig::nu),
      bound_field("x_lo", &PinnConfig::x_domain, &Interval::lo),
      bound_field("x_hi", &PinnConfig::x_domain, &Interval::hi),
      bound_field("t_lo", &PinnConfig::t_domain, &Interval::lo),
      bound_field("t_hi", &PinnConfig::t_domain, &Interval::hi),
      int_field("n_interior", &PinnConfig::n_interior),
      int_field("n_initial", &PinnConfig::n_initial),
      int_field("n_boundary", &PinnConfig::n_boundary),
      {"optimizer", [](const PinnConfig& c) { return std::string(to_string(c.optimizer)); },
       [](PinnConfig& c, std::string_view v) {
         try {
           c.optimizer = parse_optimizer(v);
         } catch (const Error&) {
           bad_value("optimizer", v, "sgd or adam");
         }
       }},
      double_field("learning_rate", &PinnConfig::learning_rate),
      double_field("lr_decay", &PinnConfig::lr_decay),
      int_field("steps", &PinnConfig::steps),
      int_field("batch_interior", &PinnConfig::batch_interior),
      double_field("lambda_res", &PinnConfig::lambda_res),
      double_field("lambda_ic", &PinnConfig::lambda_ic),
      double_field("lambda_bc", &PinnConfig::lambda_bc),
      int_field("seed", &PinnConfig::seed),
      int_field("log_every", &PinnConfig::log_every),
  };
  return table;
}

json history_json(const TrainingHistory& h) {
  json records = json::array();
  for (const HistoryRecord& r : h.records)
    records.push_back({{"step", r.step},
                       {"total", format_double(r.loss.total)},
                       {"residual", format_double(r.loss.residual)},
                       {"ic", format_double(r.loss.ic)},
                       {"bc", format_double(r.loss.bc)}});
  return records;
}

double parse_loss(const json& j, const char* key) {
  const std::string s = j.at(key).get<std::string>();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) corrupt(std::string("history value '") + key + "' unreadable");
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, 16);
  std::string s(buf, ptr);
  return std::string(16 - s.size(), '0') + s;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.emplace_back(f.key);
  return keys;
}

void set_config_key(PinnConfig& config, std::string_view key, std::string_view value) {
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(config, trim(value));
      return;
    }
  }
  throw Error(ErrorKind::Configuration, "unknown config key '" + std::string(key) + "'");
}

PinnConfig parse_config(std::string_view text, PinnConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorKind::Configuration, "config line " + std::to_string(line_no) + ": expected key = value");
    set_config_key(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  base.validate();
  return base;
}

std::string format_config(const PinnConfig& config) {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
  return out;
}

std::uint64_t config_hash(const PinnConfig& config) { return fnv1a(format_config(config)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Configuration, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Configuration, "cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::Configuration, "write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

CsvTable::CsvTable(std::vector<std::string> header) : columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) text_ += (i ? "," : "") + header[i];
  text_ += '\n';
}

CsvTable& CsvTable::row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_double(v));
  return row(cells);
}

CsvTable& CsvTable::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw Error(ErrorKind::ShapeMismatch, "CSV row width differs from header");
  for (std::size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
  text_ += '\n';
  return *this;
}

// ---------------------------------------------------------------------------

std::string encode_dump(const WeightDump& dump, std::uint32_t version) {
  if (version != 1 && version != kDumpFormatVersion)
    throw Error(ErrorKind::Configuration, "cannot write dump format version " + std::to_string(version));
  validate(dump.params);

  json header;
  json cfg = json::object();
  for (const Field& f : fields()) cfg[f.key] = f.get(dump.config);
  header["config"] = cfg;
  header["config_hash"] = hex64(config_hash(dump.config));
  header["activation"] = to_string(dump.params.activation);
  header["output_activation"] = to_string(dump.params.output_activation);
  json layers = json::array();
  std::uint64_t payload_bytes = 0;
  for (const Layer& l : dump.params.layers) {
    layers.push_back({{"rows", l.weights.rows()}, {"cols", l.weights.cols()}});
    payload_bytes += 8u * static_cast<std::uint64_t>(l.weights.size() + l.bias.size());
  }
  header["layers"] = layers;
  header["payload_bytes"] = payload_bytes;
  header["steps_completed"] = dump.steps_completed;
  if (version >= 2) header["history"] = history_json(dump.history);
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, version);
  put_le<std::uint64_t>(out, header_text.size());
  out += header_text;
  for (const Layer& l : dump.params.layers) {
    for (Index i = 0; i < l.weights.rows(); ++i)
      for (Index j = 0; j < l.weights.cols(); ++j) put_f64(out, l.weights(i, j));
    for (Index i = 0; i < l.bias.size(); ++i) put_f64(out, l.bias(i));
  }
  if (version >= 2) put_le<std::uint64_t>(out, fnv1a(out.data(), out.size()));
  return out;
}

WeightDump decode_dump(std::string_view bytes) {
  constexpr std::size_t kPrefix = sizeof(kMagic) + 4 + 8;
  if (bytes.size() < kPrefix) corrupt("file shorter than the fixed prefix");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) corrupt("bad magic");
  const auto version = get_le<std::uint32_t>(bytes, 8);
  if (version < 1 || version > kDumpFormatVersion) corrupt("unsupported format version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(bytes, 12);
  if (header_len > bytes.size() - kPrefix) corrupt("header length exceeds file size");

  std::size_t body_end = bytes.size();
  if (version >= 2) {
    if (bytes.size() < kPrefix + header_len + 8) corrupt("missing checksum");
    body_end -= 8;
    const auto stored = get_le<std::uint64_t>(bytes, body_end);
    if (stored != fnv1a(bytes.data(), body_end)) corrupt("checksum mismatch");
  }

  json header;
  try {
    header = json::parse(bytes.substr(kPrefix, header_len));
  } catch (const json::exception& e) {
    corrupt(std::string("header is not valid JSON (") + e.what() + ")");
  }

  WeightDump dump;
  try {
    for (const auto& [key, value] : header.at("config").items()) set_config_key(dump.config, key, value.get<std::string>());
    dump.params.activation = parse_activation(header.at("activation").get<std::string>());
    dump.params.output_activation = parse_activation(header.at("output_activation").get<std::string>());
    dump.steps_completed = header.at("steps_completed").get<int>();

    std::size_t offset = kPrefix + header_len;
    const auto declared = header.at("payload_bytes").get<std::uint64_t>();
    if (declared != body_end - offset)
      corrupt("payload size mismatch: header declares " + std::to_string(declared) + " bytes, file holds " +
              std::to_string(body_end - offset));
    std::uint64_t counted = 0;
    for (const auto& l : header.at("layers")) {
      const auto rows = l.at("rows").get<Index>(), cols = l.at("cols").get<Index>();
      if (rows <= 0 || cols <= 0) corrupt("non-positive layer dimension");
      counted += 8u * static_cast<std::uint64_t>(rows * cols + rows);
    }
    if (counted != declared) corrupt("layer dimensions do not match payload_bytes");
    for (const auto& l : header.at("layers")) {
      const auto rows = l.at("rows").get<Index>(), cols = l.at("cols").get<Index>();
      Layer layer{Matrix(rows, cols), Vector(rows)};
      for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j, offset += 8) layer.weights(i, j) = get_f64(bytes, offset);
      for (Index i = 0; i < rows; ++i, offset += 8) layer.bias(i) = get_f64(bytes, offset);
      dump.params.layers.push_back(std::move(layer));
    }
    if (version >= 2) {
      for (const auto& r : header.at("history")) {
        HistoryRecord rec;
        rec.step = r.at("step").get<int>();
        rec.loss = {parse_loss(r, "total"), parse_loss(r, "residual"), parse_loss(r, "ic"), parse_loss(r, "bc")};
        dump.history.records.push_back(rec);
      }
    }
    if (header.contains("config_hash") && header.at("config_hash").get<std::string>() != hex64(config_hash(dump.config)))
      corrupt("config hash does not match the config echo");
  } catch (const json::exception& e) {
    corrupt(std::string("header field missing or mistyped (") + e.what() + ")");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::CorruptDump) throw;
    corrupt(std::string("header rejected: ") + e.what());
  }
  try {
    validate(dump.params);
  } catch (const Error& e) {
    corrupt(std::string("payload rejected: ") + e.what());
  }
  return dump;
}

void save_dump(const std::filesystem::path& path, const WeightDump& dump) {
  write_file_atomic(path, encode_dump(dump));
}

WeightDump load_dump(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::CorruptDump, e.what());
  }
  return decode_dump(bytes);
}

}  // namespace pf
