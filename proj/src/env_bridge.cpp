#include "beamopt/env_bridge.hpp"

#include "beamopt/hash.hpp"

#include <nlohmann/json.hpp>

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace beamopt {

namespace {

using Clock = std::chrono::steady_clock;

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Pipe {
  int fd[2] = {-1, -1};
  ~Pipe() {
    for (int f : fd) {
      if (f >= 0) ::close(f);
    }
  }
  void close_end(int i) {
    if (fd[i] >= 0) ::close(fd[i]);
    fd[i] = -1;
  }
};

struct ChildOutput {
  std::string out;
  std::string err;
  int status = 0;
  bool timed_out = false;
};

ChildOutput run_child(const std::vector<std::string>& command, const std::string& input,
                      double timeout_seconds, const std::string& key) {
  Pipe in, out, err;
  if (::pipe2(in.fd, O_CLOEXEC) != 0 || ::pipe2(out.fd, O_CLOEXEC) != 0 ||
      ::pipe2(err.fd, O_CLOEXEC) != 0) {
    throw BridgeError(BridgeErrorKind::kSpawnFailed,
                      std::string("bridge: pipe failed: ") + std::strerror(errno), key, "");
  }
  // Report exec failures through a close-on-exec pipe.
  Pipe exec_status;
  if (::pipe2(exec_status.fd, O_CLOEXEC) != 0) {
    throw BridgeError(BridgeErrorKind::kSpawnFailed,
                      std::string("bridge: pipe failed: ") + std::strerror(errno), key, "");
  }
  std::vector<char*> argv;
  for (const auto& a : command) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) {
    throw BridgeError(BridgeErrorKind::kSpawnFailed,
                      std::string("bridge: fork failed: ") + std::strerror(errno), key, "");
  }
  if (pid == 0) {
    ::dup2(in.fd[0], STDIN_FILENO);
    ::dup2(out.fd[1], STDOUT_FILENO);
    ::dup2(err.fd[1], STDERR_FILENO);
    ::execvp(argv[0], argv.data());
    const int e = errno;
    [[maybe_unused]] auto n = ::write(exec_status.fd[1], &e, sizeof e);
    ::_exit(127);
  }
  in.close_end(0);
  out.close_end(1);
  err.close_end(1);
  exec_status.close_end(1);

  int exec_errno = 0;
  if (::read(exec_status.fd[0], &exec_errno, sizeof exec_errno) == sizeof exec_errno) {
    ::waitpid(pid, nullptr, 0);
    throw BridgeError(BridgeErrorKind::kSpawnFailed,
                      "bridge: cannot execute '" + command.front() + "': " +
                          std::strerror(exec_errno),
                      key, "");
  }

  ChildOutput res;
  size_t written = 0;
  const auto deadline =
      Clock::now() + std::chrono::duration_cast<Clock::duration>(
                         std::chrono::duration<double>(timeout_seconds));
  char buf[4096];
  while (out.fd[0] >= 0 || err.fd[0] >= 0) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) {
      res.timed_out = true;
      break;
    }
    pollfd fds[3];
    nfds_t n = 0;
    int idx_in = -1, idx_out = -1, idx_err = -1;
    if (in.fd[1] >= 0) {
      idx_in = static_cast<int>(n);
      fds[n++] = {in.fd[1], POLLOUT, 0};
    }
    if (out.fd[0] >= 0) {
      idx_out = static_cast<int>(n);
      fds[n++] = {out.fd[0], POLLIN, 0};
    }
    if (err.fd[0] >= 0) {
      idx_err = static_cast<int>(n);
      fds[n++] = {err.fd[0], POLLIN, 0};
    }
    const int timeout_ms = static_cast<int>(std::min<long long>(left.count(), 1000));
    const int rc = ::poll(fds, n, timeout_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (idx_in >= 0 && fds[idx_in].revents) {
      const ssize_t w = ::write(in.fd[1], input.data() + written, input.size() - written);
      if (w > 0) written += static_cast<size_t>(w);
      if (w < 0 || written == input.size()) in.close_end(1);
    }
    auto drain = [&](int idx, Pipe& p, std::string& sink) {
      if (idx < 0 || !fds[idx].revents) return;
      const ssize_t r = ::read(p.fd[0], buf, sizeof buf);
      if (r > 0) {
        sink.append(buf, static_cast<size_t>(r));
      } else if (r == 0 || errno != EINTR) {
        p.close_end(0);
      }
    };
    drain(idx_out, out, res.out);
    drain(idx_err, err, res.err);
  }
  if (res.timed_out) {
    ::kill(pid, SIGKILL);
    ::waitpid(pid, &res.status, 0);
    return res;
  }
  in.close_end(1);
  // Output is closed; the child may still linger before exiting.
  while (true) {
    const pid_t w = ::waitpid(pid, &res.status, WNOHANG);
    if (w == pid || (w < 0 && errno != EINTR)) break;
    if (Clock::now() >= deadline) {
      res.timed_out = true;
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &res.status, 0);
      break;
    }
    ::usleep(2000);
  }
  return res;
}

std::string first_line(const std::string& s) {
  std::istringstream is(s);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) return line;
  }
  return {};
}

}  // namespace

void BridgeSpec::validate() const {
  if (command.empty() || command.front().empty()) {
    throw std::invalid_argument("bridge: command must not be empty");
  }
  if (!(timeout_seconds > 0)) throw std::invalid_argument("bridge: timeout must be positive");
  if (retries < 0) throw std::invalid_argument("bridge: retries must be >= 0");
}

std::filesystem::path default_cache_path(const std::filesystem::path& fallback_dir) {
  const char* dir = std::getenv("BEAMOPT_CACHE_DIR");
  const std::filesystem::path base = (dir && *dir) ? std::filesystem::path(dir) : fallback_dir;
  return base / "bridge_cache.jsonl";
}

std::string_view bridge_error_name(BridgeErrorKind k) {
  switch (k) {
    case BridgeErrorKind::kSpawnFailed: return "spawn_failed";
    case BridgeErrorKind::kNonZeroExit: return "nonzero_exit";
    case BridgeErrorKind::kMalformed: return "malformed_response";
    case BridgeErrorKind::kOutOfRange: return "out_of_range";
    case BridgeErrorKind::kTimeout: return "timeout";
  }
  return "unknown";
}

std::uint64_t command_hash(const std::vector<std::string>& command) {
  std::uint64_t h = kFnvOffset;
  for (const auto& a : command) {
    h = fnv1a64(a, h);
    h = fnv1a64(std::string_view("\0", 1), h);
  }
  return h;
}

std::string bridge_request(const BeamConfig& s) {
  nlohmann::json j;
  j["beam_ids"] = s.ids();
  return j.dump();
}

double parse_bridge_response(const std::string& line, const std::string& config_key) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw BridgeError(BridgeErrorKind::kMalformed,
                      "bridge: response for " + config_key + " is not JSON: " + e.what(),
                      config_key, line);
  }
  if (!j.is_object() || !j.contains("value") || !j["value"].is_number()) {
    throw BridgeError(BridgeErrorKind::kMalformed,
                      "bridge: response for " + config_key + " lacks a numeric \"value\"",
                      config_key, line);
  }
  const double v = j["value"].get<double>();
  if (!(v >= 0.0 && v <= 1.0)) {
    throw BridgeError(BridgeErrorKind::kOutOfRange,
                      "bridge: value " + j["value"].dump() + " for " + config_key +
                          " outside [0, 1]",
                      config_key, line);
  }
  return v;
}

ExternalEnvironment::ExternalEnvironment(BridgeSpec spec)
    : spec_(std::move(spec)), command_hash_(command_hash(spec_.command)) {
  spec_.validate();
  std::signal(SIGPIPE, SIG_IGN);
  if (spec_.cache_path.empty() || !std::filesystem::exists(spec_.cache_path)) return;
  std::ifstream is(spec_.cache_path);
  std::string line;
  const std::string want = hex64(command_hash_);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;  // torn or foreign line
    if (j.value("command_hash", std::string()) != want) continue;
    if (!j.contains("key") || !j.contains("value") || !j["value"].is_number()) continue;
    cache_[j["key"].get<std::string>()] = j["value"].get<double>();
  }
}

std::string ExternalEnvironment::descriptor() const { return "bridge:" + hex64(command_hash_); }

size_t ExternalEnvironment::cache_size() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

double ExternalEnvironment::run_once(const BeamConfig& s, const std::string& key) {
  ++spawns_;
  const ChildOutput res =
      run_child(spec_.command, bridge_request(s) + "\n", spec_.timeout_seconds, key);
  if (res.timed_out) {
    throw BridgeError(BridgeErrorKind::kTimeout,
                      "bridge: no response for " + key + " within " +
                          std::to_string(spec_.timeout_seconds) + " s",
                      key, res.out);
  }
  if (!WIFEXITED(res.status) || WEXITSTATUS(res.status) != 0) {
    const std::string how = WIFEXITED(res.status)
                                ? "exit status " + std::to_string(WEXITSTATUS(res.status))
                                : "signal " + std::to_string(WTERMSIG(res.status));
    throw BridgeError(BridgeErrorKind::kNonZeroExit,
                      "bridge: command failed on " + key + " (" + how + "): " + res.err, key,
                      res.out);
  }
  return parse_bridge_response(first_line(res.out), key);
}

void ExternalEnvironment::persist(const std::string& key, double value) {
  if (spec_.cache_path.empty()) return;
  nlohmann::json j;
  j["command_hash"] = hex64(command_hash_);
  j["key"] = key;
  j["value"] = value;
  j["timestamp"] = utc_timestamp();
  // Copy-append-rename keeps the file whole for concurrent readers.
  const auto& path = spec_.cache_path;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp =
      path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (std::filesystem::exists(path)) {
      std::ifstream is(path);
      os << is.rdbuf();
    }
    os << j.dump() << '\n';
    if (!os) throw std::runtime_error("bridge: cannot write cache " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

double ExternalEnvironment::value(const BeamConfig& s) {
  const std::string key = canonical_key(s);
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      ++cache_hits_;
      return it->second;
    }
  }
  for (int attempt = 0;; ++attempt) {
    try {
      const double v = run_once(s, key);
      std::lock_guard lock(mutex_);
      cache_.emplace(key, v);
      persist(key, v);
      return v;
    } catch (const BridgeError&) {
      if (attempt >= spec_.retries) throw;
    }
  }
}

}  // namespace beamopt
