#include "vcreplay/trace_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace vcreplay {

namespace {

using ojson = nlohmann::ordered_json;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

[[noreturn]] void schema_error(const std::string &path, const std::string &why) {
  throw TraceFormatError("trace schema error at " + path + ": " + why, 0, 0);
}

const ojson &field(const ojson &obj, const char *key, const std::string &path) {
  if (!obj.is_object()) schema_error(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(path, std::string("missing key '") + key + "'");
  return *it;
}

std::int64_t int_field(const ojson &obj, const char *key, const std::string &path) {
  const ojson &v = field(obj, key, path);
  if (!v.is_number_integer()) schema_error(path + "." + key, "expected an integer");
  return v.get<std::int64_t>();
}

std::string str_field(const ojson &obj, const char *key, const std::string &path) {
  const ojson &v = field(obj, key, path);
  if (!v.is_string()) schema_error(path + "." + key, "expected a string");
  return v.get<std::string>();
}

PrimOp op_from_json(const ojson &j, const std::string &path) {
  std::string d = str_field(j, "d", path);
  if (d == "snd") return PrimOp::send(str_field(j, "ch", path));
  if (d == "rcv") return PrimOp::receive(str_field(j, "ch", path));
  if (d == "default") return PrimOp::default_case();
  schema_error(path + ".d", "unknown guard '" + d + "'");
}

LocalEvent event_from_json(const ojson &j, const std::string &path) {
  std::string t = str_field(j, "t", path);
  if (t == "signal") return ev::Signal{int_field(j, "n", path)};
  if (t == "wait") return ev::Wait{int_field(j, "n", path)};
  if (t == "pre") {
    const ojson &ops = field(j, "ops", path);
    if (!ops.is_array()) schema_error(path + ".ops", "expected an array");
    ev::Pre pre;
    for (std::size_t i = 0; i < ops.size(); ++i)
      pre.ops.push_back(op_from_json(ops[i], path + ".ops[" + std::to_string(i) + "]"));
    return pre;
  }
  if (t == "post_snd")
    return ev::PostSend{static_cast<ThreadId>(int_field(j, "tid", path)), int_field(j, "pc", path),
                        str_field(j, "ch", path)};
  if (t == "post_rcv")
    return ev::PostReceive{static_cast<ThreadId>(int_field(j, "tid", path)), int_field(j, "pc", path),
                           str_field(j, "ch", path)};
  if (t == "post_close") return ev::PostClose{str_field(j, "ch", path)};
  if (t == "post_default") return ev::PostDefault{};
  if (t == "chan_make") {
    std::int64_t cap = int_field(j, "cap", path);
    if (cap < 0) schema_error(path + ".cap", "capacity must be non-negative");
    return ev::ChanMake{str_field(j, "ch", path), static_cast<std::size_t>(cap)};
  }
  schema_error(path + ".t", "unknown event type '" + t + "'");
}

ojson op_to_json(const PrimOp &op) {
  ojson j;
  switch (op.kind) {
    case OpKind::Send: j["d"] = "snd"; j["ch"] = op.channel; break;
    case OpKind::Receive: j["d"] = "rcv"; j["ch"] = op.channel; break;
    case OpKind::Default: j["d"] = "default"; break;
  }
  return j;
}

ojson event_to_json(const LocalEvent &e) {
  ojson j;
  std::visit(overloaded{
                 [&](const ev::Signal &s) { j["t"] = "signal"; j["n"] = s.n; },
                 [&](const ev::Wait &s) { j["t"] = "wait"; j["n"] = s.n; },
                 [&](const ev::Pre &p) {
                   j["t"] = "pre";
                   j["ops"] = ojson::array();
                   for (const auto &op : p.ops) j["ops"].push_back(op_to_json(op));
                 },
                 [&](const ev::PostSend &p) {
                   j["t"] = "post_snd"; j["tid"] = p.tid; j["pc"] = p.pc; j["ch"] = p.channel;
                 },
                 [&](const ev::PostReceive &p) {
                   j["t"] = "post_rcv"; j["tid"] = p.tid; j["pc"] = p.pc; j["ch"] = p.channel;
                 },
                 [&](const ev::PostClose &p) { j["t"] = "post_close"; j["ch"] = p.channel; },
                 [&](const ev::PostDefault &) { j["t"] = "post_default"; },
                 [&](const ev::ChanMake &p) { j["t"] = "chan_make"; j["ch"] = p.channel; j["cap"] = p.capacity; },
             },
             e);
  return j;
}

std::size_t line_of(std::string_view bytes, std::size_t offset) {
  offset = std::min(offset, bytes.size());
  return 1 + static_cast<std::size_t>(std::count(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

}  // namespace

TraceSet read_trace(std::string_view bytes) {
  ojson root;
  try {
    root = ojson::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error &e) {
    throw TraceFormatError(std::string("trace syntax error: ") + e.what(), line_of(bytes, e.byte), e.byte);
  }

  if (int_field(root, "version", "$") != 1) schema_error("$.version", "unsupported version");
  std::int64_t threads = int_field(root, "threads", "$");
  if (threads < 0) schema_error("$.threads", "thread count must be non-negative");

  TraceSet ts;
  ts.threads = static_cast<std::size_t>(threads);

  const ojson &channels = field(root, "channels", "$");
  if (!channels.is_array()) schema_error("$.channels", "expected an array");
  for (std::size_t i = 0; i < channels.size(); ++i) {
    std::string path = "$.channels[" + std::to_string(i) + "]";
    std::int64_t cap = int_field(channels[i], "cap", path);
    if (cap < 0) schema_error(path + ".cap", "capacity must be non-negative");
    ts.channels.push_back({str_field(channels[i], "id", path), static_cast<std::size_t>(cap)});
  }

  const ojson &traces = field(root, "traces", "$");
  if (!traces.is_object()) schema_error("$.traces", "expected an object");
  for (auto it = traces.begin(); it != traces.end(); ++it) {
    std::string path = "$.traces." + it.key();
    ThreadId tid = 0;
    try {
      std::size_t used = 0;
      tid = static_cast<ThreadId>(std::stol(it.key(), &used));
      if (used != it.key().size()) throw std::invalid_argument("trailing");
    } catch (const std::exception &) {
      schema_error(path, "thread key is not an integer");
    }
    if (!it.value().is_array()) schema_error(path, "expected an array");
    LocalTrace &trace = ts.traces[tid];
    for (std::size_t i = 0; i < it.value().size(); ++i)
      trace.push_back(event_from_json(it.value()[i], path + "[" + std::to_string(i) + "]"));
  }
  for (std::size_t t = 1; t <= ts.threads; ++t) ts.traces.try_emplace(static_cast<ThreadId>(t));
  return ts;
}

std::string write_trace(const TraceSet &ts) {
  if (auto v = validate(ts); !v.empty()) throw TraceValidationError("refusing to write invalid trace:\n" + describe(v));
  ojson root;
  root["version"] = 1;
  root["threads"] = ts.threads;
  root["channels"] = ojson::array();
  for (const auto &c : ts.channels) {
    ojson cj;
    cj["id"] = c.id;
    cj["cap"] = c.capacity;
    root["channels"].push_back(std::move(cj));
  }
  ojson traces = ojson::object();
  for (std::size_t t = 1; t <= ts.threads; ++t) {
    ojson events = ojson::array();
    for (const auto &e : ts.trace(static_cast<ThreadId>(t))) events.push_back(event_to_json(e));
    traces[std::to_string(t)] = std::move(events);
  }
  root["traces"] = std::move(traces);
  return root.dump();
}

TraceSet load_trace(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return read_trace(buf.str());
}

void save_trace(const TraceSet &ts, const std::filesystem::path &path) {
  std::string bytes = write_trace(ts);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace file " + path.string());
  out << bytes << '\n';
}

}  // namespace vcreplay
