#include "silvaflux/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "silvaflux/error.hpp"
#include "silvaflux/reconcile.hpp"
#include "silvaflux/text.hpp"

namespace silvaflux::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open '" + path.string() + "'", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::MissingFile, "cannot write '" + tmp.string() + "'", tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::MissingFile, "short write to '" + tmp.string() + "'", tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

std::optional<double> to_number(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) return std::nullopt;
  return value;
}

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r");
  return std::string(text.substr(first, last - first + 1));
}

}  // namespace

// CSV

CsvTable CsvTable::parse(std::string_view text, std::string path) {
  CsvTable table;
  table.path_ = std::move(path);
  std::vector<CsvRow> records;
  std::size_t line = 1, i = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  while (i < text.size()) {
    // Skip blank and comment lines.
    if (text[i] == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      i += 2;
      ++line;
      continue;
    }
    const auto eol = std::min(text.find('\n', i), text.size());
    if (text[i] == '#' || trim(text.substr(i, eol - i)).empty()) {
      i = eol;
      continue;
    }
    CsvRow row;
    row.line = line;
    std::string field;
    bool quoted = false, was_quoted = false;
    for (;; ++i) {
      if (i >= text.size()) {
        if (quoted) throw Error(ErrorCode::ParseError, "unterminated quoted field", table.path_, row.line);
        row.fields.push_back(was_quoted ? field : trim(field));
        break;
      }
      const char c = text[i];
      if (quoted) {
        if (c == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field += '"';
            ++i;
          } else {
            quoted = false;
          }
        } else {
          if (c == '\n') ++line;
          field += c;
        }
        continue;
      }
      if (c == '"' && trim(field).empty()) {
        field.clear();
        quoted = was_quoted = true;
      } else if (c == ',') {
        row.fields.push_back(was_quoted ? field : trim(field));
        field.clear();
        was_quoted = false;
      } else if (c == '\n' || (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n')) {
        row.fields.push_back(was_quoted ? field : trim(field));
        i += c == '\r' ? 2 : 1;
        ++line;
        break;
      } else if (was_quoted && c != ' ' && c != '\t') {
        throw Error(ErrorCode::ParseError, "text after closing quote", table.path_, line);
      } else if (!was_quoted) {
        field += c;
      }
    }
    records.push_back(std::move(row));
  }
  if (records.empty()) throw Error(ErrorCode::ParseError, "missing CSV header", table.path_, 1);
  table.header_ = std::move(records.front().fields);
  std::set<std::string> seen;
  for (const auto& name : table.header_)
    if (!seen.insert(name).second)
      throw Error(ErrorCode::ParseError, "duplicate column '" + name + "'", table.path_, records.front().line);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].fields.size() != table.header_.size())
      throw Error(ErrorCode::ParseError,
                  "expected " + std::to_string(table.header_.size()) + " fields, found " +
                      std::to_string(records[r].fields.size()),
                  table.path_, records[r].line);
    table.rows_.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable CsvTable::load(const fs::path& path) { return parse(read_file(path), path.string()); }

bool CsvTable::has_column(std::string_view name) const {
  return std::find(header_.begin(), header_.end(), name) != header_.end();
}

std::size_t CsvTable::column(std::string_view name) const {
  auto it = std::find(header_.begin(), header_.end(), name);
  if (it == header_.end())
    throw Error(ErrorCode::ParseError, "missing column '" + std::string(name) + "'", path_, 1);
  return static_cast<std::size_t>(it - header_.begin());
}

const std::string& CsvTable::field(const CsvRow& row, std::string_view name) const {
  return row.fields[column(name)];
}

double CsvTable::number(const CsvRow& row, std::string_view name) const {
  const auto& text = field(row, name);
  auto value = to_number(text);
  if (!value || std::isnan(*value))
    throw Error(ErrorCode::ParseError, "column '" + std::string(name) + "': '" + text + "' is not a number", path_,
                row.line);
  return *value;
}

std::string csv_field(std::string_view text) {
  const bool needs_quotes = text.find_first_of(",\"\n\r") != std::string_view::npos ||
                            (!text.empty() && (std::isspace(static_cast<unsigned char>(text.front())) ||
                                               std::isspace(static_cast<unsigned char>(text.back())) ||
                                               text.front() == '#'));
  if (!needs_quotes) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_field(fields[i]);
  }
  return out + "\n";
}

// TOML subset

namespace {

class TomlParser {
 public:
  TomlParser(std::string_view text, std::string path) : s_(text), path_(std::move(path)) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        table = header(root);
      } else {
        key_value(*table);
      }
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw Error(ErrorCode::ParseError, message, path_, line_);
  }

  bool eof() const { return i_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[i_]; }

  void skip_spaces() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++i_;
  }

  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') ++i_;
  }

  bool newline() {
    if (peek() == '\r' && i_ + 1 < s_.size() && s_[i_ + 1] == '\n') ++i_;
    if (peek() != '\n') return false;
    ++i_;
    ++line_;
    return true;
  }

  void skip_blank_lines() {
    while (true) {
      skip_spaces();
      skip_comment();
      if (!newline()) return;
    }
  }

  // Whitespace, comments and newlines inside arrays.
  void skip_layout() {
    while (true) {
      skip_spaces();
      skip_comment();
      if (!newline()) return;
    }
  }

  void end_of_line() {
    skip_spaces();
    skip_comment();
    if (!eof() && !newline()) fail(std::string("unexpected '") + peek() + "'");
  }

  std::string bare_or_quoted_key() {
    skip_spaces();
    if (peek() == '"' || peek() == '\'') return string_value();
    std::string key;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-'))
      key += s_[i_++];
    if (key.empty()) fail("expected a key");
    return key;
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts{bare_or_quoted_key()};
    skip_spaces();
    while (peek() == '.') {
      ++i_;
      parts.push_back(bare_or_quoted_key());
      skip_spaces();
    }
    return parts;
  }

  json* descend(json* at, const std::string& key) {
    json& next = (*at)[key];
    if (next.is_null()) next = json::object();
    if (next.is_array()) {
      if (next.empty() || !next.back().is_object()) fail("'" + key + "' is not a table");
      return &next.back();
    }
    if (!next.is_object()) fail("'" + key + "' is not a table");
    return &next;
  }

  json* header(json& root) {
    ++i_;
    const bool array = peek() == '[';
    if (array) ++i_;
    const auto parts = dotted_key();
    if (peek() != ']') fail("expected ']'");
    ++i_;
    if (array) {
      if (peek() != ']') fail("expected ']]'");
      ++i_;
    }
    json* at = &root;
    for (std::size_t k = 0; k + 1 < parts.size(); ++k) at = descend(at, parts[k]);
    json& leaf = (*at)[parts.back()];
    if (array) {
      if (leaf.is_null()) leaf = json::array();
      if (!leaf.is_array()) fail("'" + parts.back() + "' is not an array of tables");
      leaf.push_back(json::object());
      return &leaf.back();
    }
    if (leaf.is_null()) leaf = json::object();
    if (!leaf.is_object()) fail("'" + parts.back() + "' is already defined");
    return &leaf;
  }

  void key_value(json& table) {
    const auto parts = dotted_key();
    if (peek() != '=') fail("expected '=' after key");
    ++i_;
    skip_spaces();
    json value = parse_value();
    json* at = &table;
    for (std::size_t k = 0; k + 1 < parts.size(); ++k) at = descend(at, parts[k]);
    if (at->contains(parts.back())) fail("duplicate key '" + parts.back() + "'");
    (*at)[parts.back()] = std::move(value);
  }

  json parse_value() {
    const char c = peek();
    if (c == '"' || c == '\'') return string_value();
    if (c == '[') return array_value();
    if (c == '{') return inline_table();
    if (s_.compare(i_, 4, "true") == 0) {
      i_ += 4;
      return true;
    }
    if (s_.compare(i_, 5, "false") == 0) {
      i_ += 5;
      return false;
    }
    return number_value();
  }

  std::string string_value() {
    const char quote = s_[i_++];
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = s_[i_++];
      if (c == quote) break;
      if (c == '\\' && quote == '"') {
        if (eof()) fail("unterminated string");
        const char e = s_[i_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(std::string("unsupported escape '\\") + e + "'");
        }
      } else {
        out += c;
      }
    }
    return out;
  }

  json array_value() {
    ++i_;
    json out = json::array();
    while (true) {
      skip_layout();
      if (peek() == ']') {
        ++i_;
        return out;
      }
      out.push_back(parse_value());
      skip_layout();
      if (peek() == ',') {
        ++i_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  json inline_table() {
    ++i_;
    json out = json::object();
    skip_spaces();
    if (peek() == '}') {
      ++i_;
      return out;
    }
    while (true) {
      key_value(out);
      skip_spaces();
      if (peek() == ',') {
        ++i_;
        continue;
      }
      if (peek() == '}') {
        ++i_;
        return out;
      }
      fail("expected ',' or '}' in inline table");
    }
  }

  json number_value() {
    std::string text;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                      peek() == '.' || peek() == '_'))
      text += s_[i_++];
    std::erase(text, '_');
    if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    const bool integral = text.find_first_of(".eE") == std::string::npos;
    if (integral) {
      std::string_view digits = text;
      if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
      long long v = 0;
      auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
      if (ec == std::errc{} && end == digits.data() + digits.size() && !digits.empty()) return v;
    }
    auto value = to_number(text);
    if (!value || std::isnan(*value)) fail("invalid value '" + text + "'");
    return *value;
  }

  std::string_view s_;
  std::string path_;
  std::size_t i_ = 0;
  std::size_t line_ = 1;
};

// Typed access to parsed TOML with path-carrying errors.
struct Fields {
  const json& table;
  const std::string& path;
  std::string where;

  [[noreturn]] void fail(const std::string& message) const {
    throw Error(ErrorCode::ParseError, where + ": " + message, path);
  }

  void allow(std::initializer_list<std::string_view> keys) const {
    for (const auto& [key, value] : table.items())
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) fail("unknown key '" + key + "'");
  }

  bool has(const char* key) const { return table.contains(key); }

  std::string text(const char* key) const {
    if (!has(key)) fail(std::string("missing '") + key + "'");
    if (!table.at(key).is_string()) fail(std::string("'") + key + "' must be a string");
    return table.at(key).get<std::string>();
  }

  std::string text_or(const char* key, std::string fallback) const { return has(key) ? text(key) : fallback; }

  double number(const char* key) const {
    if (!has(key)) fail(std::string("missing '") + key + "'");
    if (!table.at(key).is_number()) fail(std::string("'") + key + "' must be a number");
    return table.at(key).get<double>();
  }

  std::optional<double> maybe_number(const char* key) const {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  std::vector<std::string> texts(const char* key) const {
    if (!has(key) || !table.at(key).is_array()) fail(std::string("'") + key + "' must be an array of strings");
    std::vector<std::string> out;
    for (const auto& v : table.at(key)) {
      if (!v.is_string()) fail(std::string("'") + key + "' must be an array of strings");
      out.push_back(v.get<std::string>());
    }
    return out;
  }
};

NodeKind node_kind_or_fail(const std::string& text, const Fields& f) {
  auto kind = parse_node_kind(text);
  if (!kind) f.fail("unknown node kind '" + text + "'");
  return *kind;
}

DestinationClass class_or_fail(const std::string& text, const Fields& f) {
  auto cls = parse_destination_class(text);
  if (!cls) f.fail("unknown destination class '" + text + "'");
  return *cls;
}

Edit parse_edit(const json& table, const std::string& path, std::size_t index) {
  Fields f{table, path, "edit " + std::to_string(index + 1)};
  if (!table.is_object()) f.fail("must be a table");
  const auto kind = f.text("kind");
  const auto name = f.text_or("name", "edit " + std::to_string(index + 1));
  f.where = "edit '" + name + "'";
  if (kind == "reroute") {
    f.allow({"kind", "name", "product", "from", "old_to", "new_to", "amount", "fraction"});
    return Reroute{name, f.text("product"), f.text("from"), f.text("old_to"), f.text("new_to"),
                   f.maybe_number("amount"), f.maybe_number("fraction")};
  }
  if (kind == "insert_actor") {
    f.allow({"kind", "name", "node", "inbound"});
    InsertActor actor;
    actor.name = name;
    if (!f.has("node") || !table.at("node").is_object()) f.fail("'node' must be a table");
    Fields node{table.at("node"), path, f.where + " node"};
    node.allow({"id", "label", "kind", "class"});
    actor.node = {node.text("id"), node.text_or("label", ""), node_kind_or_fail(node.text_or("kind", "sink"), node)};
    if (node.has("class")) actor.destination = class_or_fail(node.text("class"), node);
    if (f.has("inbound")) {
      if (!table.at("inbound").is_array()) f.fail("'inbound' must be an array of tables");
      for (const auto& in : table.at("inbound")) {
        Fields supply{in, path, f.where + " inbound"};
        if (!in.is_object()) supply.fail("must be a table");
        supply.allow({"from", "product", "amount", "divert_from"});
        InboundSupply s{supply.text("from"), supply.text("product"), supply.number("amount"), std::nullopt};
        if (supply.has("divert_from")) s.divert_from = supply.text("divert_from");
        actor.inbound.push_back(std::move(s));
      }
    }
    return actor;
  }
  if (kind == "cap_by_deposit") {
    f.allow({"kind", "name", "node", "product", "cap_mass", "yield"});
    return CapByDeposit{name, f.text("node"), f.text("product"), f.number("cap_mass"), f.number("yield")};
  }
  if (kind == "scale") {
    f.allow({"kind", "name", "flow", "factor"});
    auto key = parse_flow_key(f.text("flow"));
    if (!key) f.fail("'flow' must read from->to:product");
    return Scale{name, *key, f.number("factor")};
  }
  f.fail("unknown edit kind '" + kind + "'");
}

std::string nonempty(const CsvTable& t, const CsvRow& row, std::string_view column) {
  const auto& v = t.field(row, column);
  if (v.empty()) throw Error(ErrorCode::ParseError, "empty '" + std::string(column) + "'", t.path(), row.line);
  return v;
}

}  // namespace

json parse_toml(std::string_view text, const std::string& path) { return TomlParser(text, path).parse(); }

// Loaders

namespace {

std::vector<Flow> flows_from(const CsvTable& t) {
  std::vector<Flow> out;
  for (const auto& row : t.rows()) {
    Flow f{t.field(row, "id"),
           {nonempty(t, row, "from"), nonempty(t, row, "to"), nonempty(t, row, "product")},
           t.number(row, "quantity")};
    if (f.id.empty()) f.id = to_string(f.key);
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<Product> products_from(const CsvTable& t) {
  std::vector<Product> out;
  for (const auto& row : t.rows()) {
    const auto& cat = t.field(row, "category");
    auto category = parse_category(cat);
    if (!category) throw Error(ErrorCode::ParseError, "unknown category '" + cat + "'", t.path(), row.line);
    out.push_back({nonempty(t, row, "id"), t.field(row, "label"), *category});
  }
  return out;
}

std::vector<Node> nodes_from(const CsvTable& t) {
  std::vector<Node> out;
  for (const auto& row : t.rows()) {
    const auto& k = t.field(row, "kind");
    auto kind = parse_node_kind(k);
    if (!kind) throw Error(ErrorCode::ParseError, "unknown node kind '" + k + "'", t.path(), row.line);
    out.push_back({nonempty(t, row, "id"), t.field(row, "label"), *kind});
  }
  return out;
}

}  // namespace

std::vector<Product> load_products(const fs::path& path) { return products_from(CsvTable::load(path)); }
std::vector<Node> load_nodes(const fs::path& path) { return nodes_from(CsvTable::load(path)); }
std::vector<Flow> load_flows(const fs::path& path) { return flows_from(CsvTable::load(path)); }

void require_valid(const FlowGraph& graph, const std::string& path) {
  const auto violations = validate(graph);
  if (violations.empty()) return;
  std::string message = violations.front().rule + " (" + violations.front().subject + "): " +
                        violations.front().message;
  if (violations.size() > 1) message += " (and " + std::to_string(violations.size() - 1) + " more)";
  throw Error(ErrorCode::InvalidInput, message, path);
}

FlowGraph load_graph(const fs::path& products, const fs::path& nodes, const fs::path& flows, std::string period) {
  FlowGraph g;
  g.products = load_products(products);
  g.nodes = load_nodes(nodes);
  g.flows = load_flows(flows);
  g.period = std::move(period);
  require_valid(g, flows.string());
  return g;
}

FlowGraph parse_graph(std::string_view products, std::string_view nodes, std::string_view flows,
                      std::string period) {
  FlowGraph g;
  g.products = products_from(CsvTable::parse(products, "products"));
  g.nodes = nodes_from(CsvTable::parse(nodes, "nodes"));
  g.flows = flows_from(CsvTable::parse(flows, "flows"));
  g.period = std::move(period);
  return g;
}

std::vector<ReportedFlow> load_reported_flows(const fs::path& path) {
  const auto t = CsvTable::load(path);
  std::vector<ReportedFlow> out;
  for (const auto& row : t.rows()) {
    ReportedFlow f{t.field(row, "flow_id"),
                   {nonempty(t, row, "from"), nonempty(t, row, "to"), nonempty(t, row, "product")},
                   t.number(row, "quantity_reported"),
                   row.line};
    if (f.id.empty()) f.id = to_string(f.key);
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<Observation> load_observations(const fs::path& path) {
  const auto t = CsvTable::load(path);
  std::vector<Observation> out;
  for (const auto& row : t.rows()) {
    Observation obs;
    try {
      obs.target = parse_target(t.field(row, "target_kind"), t.field(row, "target_key"));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, e.what(), t.path(), row.line);
    }
    obs.value = t.number(row, "value");
    if (t.has_column("sigma")) {
      const auto& sigma = t.field(row, "sigma");
      if (sigma == "exact")
        obs.exact = true;
      else if (!sigma.empty())
        obs.sigma = t.number(row, "sigma");
    }
    if (t.has_column("source")) obs.source = t.field(row, "source");
    out.push_back(std::move(obs));
  }
  return out;
}

ConversionTable load_coefficients(const fs::path& path) {
  const auto t = CsvTable::load(path);
  std::optional<double> default_density;
  for (const auto& row : t.rows())
    if (t.field(row, "product") == "__default__" && !t.field(row, "carbon_density").empty())
      default_density = t.number(row, "carbon_density");
  ConversionTable table = default_density ? ConversionTable(*default_density) : ConversionTable();
  for (const auto& row : t.rows()) {
    const auto& product = nonempty(t, row, "product");
    if (product == "__default__") continue;
    try {
      if (!t.field(row, "wfe").empty()) table.set_wfe(product, t.number(row, "wfe"));
      if (!t.field(row, "carbon_density").empty()) table.set_carbon_density(product, t.number(row, "carbon_density"));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ParseError) throw;
      throw Error(e.code(), e.what(), t.path(), row.line);
    }
  }
  return table;
}

DestinationClasses load_destinations(const fs::path& path) {
  const auto t = CsvTable::load(path);
  DestinationClasses out;
  for (const auto& row : t.rows()) {
    const auto& text = t.field(row, "class");
    auto cls = parse_destination_class(text);
    if (!cls) throw Error(ErrorCode::ParseError, "unknown destination class '" + text + "'", t.path(), row.line);
    if (!out.emplace(nonempty(t, row, "node_id"), *cls).second)
      throw Error(ErrorCode::ParseError, "node listed twice", t.path(), row.line);
  }
  return out;
}

std::vector<ReportRowSpec> load_report_rows(const fs::path& path) {
  const auto t = CsvTable::load(path);
  std::vector<ReportRowSpec> out;
  for (const auto& row : t.rows()) {
    ReportRowSpec spec;
    if (t.has_column("section")) spec.section = t.field(row, "section");
    spec.label = nonempty(t, row, "label");
    try {
      spec.target = parse_target(t.field(row, "target_kind"), t.field(row, "target_key"));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, e.what(), t.path(), row.line);
    }
    if (t.has_column("note")) spec.note = t.field(row, "note");
    out.push_back(std::move(spec));
  }
  return out;
}

std::vector<DeltaRow> load_report_table(const fs::path& path) {
  const auto t = CsvTable::load(path);
  std::vector<DeltaRow> out;
  for (const auto& row : t.rows()) {
    DeltaRow r;
    if (t.has_column("section")) r.section = t.field(row, "section");
    r.label = nonempty(t, row, "label");
    r.baseline = t.number(row, "baseline");
    const auto& ref = t.field(row, "reference");
    if (!ref.empty() && ref != "N/A") r.reference = t.number(row, "reference");
    if (t.has_column("note")) r.note = t.field(row, "note");
    out.push_back(std::move(r));
  }
  return out;
}

Scenario parse_scenario(std::string_view text, const std::string& path) {
  const json doc = parse_toml(text, path);
  Fields top{doc, path, "scenario"};
  top.allow({"name", "edit", "absorb"});
  Scenario s;
  s.name = top.text_or("name", "");
  if (doc.contains("edit")) {
    if (!doc.at("edit").is_array()) top.fail("'edit' must be an array of tables ([[edit]])");
    for (std::size_t k = 0; k < doc.at("edit").size(); ++k) s.edits.push_back(parse_edit(doc.at("edit")[k], path, k));
  }
  if (doc.contains("absorb")) {
    if (!doc.at("absorb").is_array()) top.fail("'absorb' must be an array of tables ([[absorb]])");
    for (const auto& rule : doc.at("absorb")) {
      Fields f{rule, path, "absorb rule"};
      f.allow({"node", "products"});
      s.absorb.push_back({f.text("node"), f.texts("products")});
    }
  }
  return s;
}

Scenario load_scenario(const fs::path& path) { return parse_scenario(read_file(path), path.string()); }

PoolParams parse_pool_params(std::string_view text, const std::string& path) {
  const json doc = parse_toml(text, path);
  Fields top{doc, path, "pool parameters"};
  top.allow({"preset", "pools", "category"});
  const auto preset = top.text_or("preset", "default");
  PoolParams p;
  if (preset == "default")
    p = PoolParams::defaults();
  else if (preset == "panel_service_life")
    p = PoolParams::panel_service_life_preset();
  else
    top.fail("unknown preset '" + preset + "'");
  if (doc.contains("pools")) {
    Fields pools{doc.at("pools"), path, "[pools]"};
    pools.allow({"swds_fraction", "swds_half_life", "recycling_rate"});
    p.swds_fraction = pools.maybe_number("swds_fraction").value_or(p.swds_fraction);
    p.swds_half_life = pools.maybe_number("swds_half_life").value_or(p.swds_half_life);
    p.recycling_rate = pools.maybe_number("recycling_rate").value_or(p.recycling_rate);
  }
  if (doc.contains("category")) {
    for (const auto& [name, table] : doc.at("category").items()) {
      Fields f{table, path, "[category." + name + "]"};
      auto category = parse_category(name);
      if (!category) f.fail("unknown product category");
      f.allow({"half_life"});
      p.half_life_of(*category) = f.number("half_life");
    }
  }
  try {
    p.validate();
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), path);
  }
  return p;
}

PoolParams load_pool_params(const fs::path& path) { return parse_pool_params(read_file(path), path.string()); }

// Writers

std::string products_csv(const FlowGraph& graph) {
  std::string out = csv_line({"id", "label", "category"});
  for (const auto& p : canonicalized(graph).products)
    out += csv_line({p.id, p.label, std::string(to_string(p.category))});
  return out;
}

std::string nodes_csv(const FlowGraph& graph) {
  std::string out = csv_line({"id", "label", "kind"});
  for (const auto& n : canonicalized(graph).nodes) out += csv_line({n.id, n.label, std::string(to_string(n.kind))});
  return out;
}

std::string flows_csv(const FlowGraph& graph) {
  std::string out = csv_line({"id", "from", "to", "product", "quantity"});
  for (const auto& f : canonicalized(graph).flows)
    out += csv_line({f.id, f.key.from, f.key.to, f.key.product, format_exact(f.quantity)});
  return out;
}

std::string observations_csv(const std::vector<Observation>& observations) {
  std::string out = csv_line({"target_kind", "target_key", "value", "sigma", "source"});
  for (const auto& o : observations)
    out += csv_line({target_kind(o.target), target_key(o.target), format_exact(o.value),
                     o.exact ? "exact" : (o.sigma ? format_exact(*o.sigma) : ""), o.source});
  return out;
}

std::string residuals_csv(const std::vector<ObservationResidual>& residuals) {
  std::string out = csv_line({"target_kind", "target_key", "observed", "reconciled", "residual", "sigma", "source"});
  for (const auto& r : residuals)
    out += csv_line({r.target_kind, r.target_key, format_exact(r.observed), format_exact(r.reconciled),
                     format_exact(r.residual), r.sigma == 0.0 ? "exact" : format_exact(r.sigma), r.source});
  return out;
}

std::string delta_csv(const DeltaReport& report) {
  std::string out = csv_line({"label", "baseline", "reference", "delta_percent", "flag"});
  for (const auto& r : report.rows)
    out += csv_line({r.display_label(), format_fixed(r.baseline), r.reference ? format_fixed(*r.reference) : "N/A",
                     r.delta_percent ? format_fixed(*r.delta_percent) : "N/A", r.flag()});
  return out;
}

std::string diff_csv(const ScenarioDiff& diff) {
  std::string out = csv_line({"kind", "subject", "delta"});
  for (const auto& [key, d] : diff.flow_deltas) out += csv_line({"flow", to_string(key), format_exact(d)});
  for (const auto& [node, d] : diff.throughput_deltas) out += csv_line({"throughput", node, format_exact(d)});
  out += csv_line({"carbon_tC", "burned", format_exact(diff.carbon.burned)});
  out += csv_line({"carbon_tC", "stored_in_products", format_exact(diff.carbon.stored_in_products)});
  out += csv_line({"carbon_tC", "exported", format_exact(diff.carbon.exported)});
  out += csv_line({"volume", "rerouted", format_exact(diff.rerouted_volume)});
  return out;
}

std::string ledger_csv(const CarbonLedger& ledger) {
  std::string out = csv_line({"year", "category", "hwp_in_use", "swds", "inflow_from_harvest", "emitted_energy",
                              "emitted_decay", "exported"});
  for (const auto& y : ledger.years)
    for (std::size_t c = 0; c < kCategoryCount; ++c) {
      const auto i = static_cast<Eigen::Index>(c);
      out += csv_line({std::to_string(y.year), std::string(to_string(static_cast<ProductCategory>(c))),
                       format_exact(y.stocks.hwp_in_use(i)), format_exact(y.stocks.swds(i)),
                       format_exact(y.fluxes.inflow_from_harvest(i)), format_exact(y.fluxes.emitted_energy(i)),
                       format_exact(y.fluxes.emitted_decay(i)), format_exact(y.fluxes.exported(i))});
    }
  return out;
}

std::string ledger_delta_csv(const std::vector<LedgerDelta>& deltas) {
  std::string out = csv_line({"year", "hwp_in_use", "swds", "inflow_from_harvest", "emitted_energy", "emitted_decay",
                              "exported"});
  for (const auto& d : deltas)
    out += csv_line({std::to_string(d.year), format_exact(d.hwp_in_use), format_exact(d.swds),
                     format_exact(d.inflow_from_harvest), format_exact(d.emitted_energy),
                     format_exact(d.emitted_decay), format_exact(d.exported)});
  return out;
}

}  // namespace silvaflux::io
