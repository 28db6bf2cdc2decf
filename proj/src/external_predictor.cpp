#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <mutex>
#include <string>
#include <thread>

#include "refx/models.hpp"

extern char** environ;

namespace refx {

namespace {

constexpr int kResponseTimeoutMs = 60'000;

std::string quote_command(const std::vector<std::string>& argv) {
  return join(argv, " ");
}

// Blocks SIGPIPE for the calling thread, so a dead child surfaces as EPIPE
// instead of killing the parent. A SIGPIPE raised meanwhile is consumed.
class SigpipeGuard {
 public:
  SigpipeGuard() {
    sigemptyset(&block_);
    sigaddset(&block_, SIGPIPE);
    pthread_sigmask(SIG_BLOCK, &block_, &old_);
  }
  ~SigpipeGuard() {
    const timespec zero{0, 0};
    while (sigtimedwait(&block_, nullptr, &zero) > 0) {
    }
    pthread_sigmask(SIG_SETMASK, &old_, nullptr);
  }

 private:
  sigset_t block_, old_;
};

class ChildProcess {
 public:
  explicit ChildProcess(std::vector<std::string> argv) : argv_(std::move(argv)) {
    if (argv_.empty()) throw InvalidArgument("external model: empty command");
    int in_pipe[2], out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0 || pipe2(out_pipe, O_CLOEXEC) != 0)
      throw Error(std::string("external model: pipe failed: ") + std::strerror(errno));

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

    std::vector<char*> args;
    for (auto& a : argv_) args.push_back(a.data());
    args.push_back(nullptr);
    const int rc = posix_spawnp(&pid_, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    if (rc != 0) {
      ::close(in_pipe[1]);
      ::close(out_pipe[0]);
      throw Error("external model: cannot start '" + quote_command(argv_) +
                  "': " + std::strerror(rc));
    }
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    ::fcntl(to_child_, F_SETFL, ::fcntl(to_child_, F_GETFL) | O_NONBLOCK);
  }

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  ~ChildProcess() {
    if (to_child_ >= 0) ::close(to_child_);  // EOF asks the child to exit
    to_child_ = -1;
    if (from_child_ >= 0) ::close(from_child_);
    from_child_ = -1;
    reap(std::chrono::seconds(2));
  }

  Vector exchange(const Eigen::Ref<const Matrix>& rows) {
    std::lock_guard lock(mutex_);
    if (broken_) throw ProtocolError("external model '" + quote_command(argv_) +
                                     "' is no longer usable: " + broken_reason_);
    std::string request = std::to_string(rows.rows()) + " " +
                          std::to_string(rows.cols()) + "\n";
    char buf[32];
    for (Index i = 0; i < rows.rows(); ++i) {
      for (Index j = 0; j < rows.cols(); ++j) {
        if (j) request += ',';
        std::snprintf(buf, sizeof buf, "%.17g", rows(i, j));
        request += buf;
      }
      request += '\n';
    }
    switch (send(request)) {
      case SendStatus::kOk:
        break;
      case SendStatus::kTimeout:
        fail("external model timed out accepting a batch of " + std::to_string(rows.rows()) +
             " rows");
      case SendStatus::kClosed:
        fail("external model closed its input before accepting the batch (" +
             exit_status() + "): expected " + std::to_string(rows.rows()) +
             " lines, received 0");
    }

    Vector scores(rows.rows());
    for (Index i = 0; i < rows.rows(); ++i) {
      std::string line;
      const auto status = read_line(line);
      if (status == ReadStatus::kEof)
        fail("external model exited early (" + exit_status() + "): expected " +
             std::to_string(rows.rows()) + " lines, received " + std::to_string(i) +
             (i > 0 ? "; last line '" + last_line_ + "'" : std::string()));
      if (status == ReadStatus::kTimeout)
        fail("external model timed out: expected " + std::to_string(rows.rows()) +
             " lines, received " + std::to_string(i));
      last_line_ = line;
      scores[i] = parse_score(line, i);
    }
    return scores;
  }

 private:
  enum class ReadStatus { kLine, kEof, kTimeout };
  enum class SendStatus { kOk, kClosed, kTimeout };

  // Writes the request while draining the child's stdout into buffer_. A
  // child that answers row by row would otherwise fill its output pipe and
  // stall while the parent is still blocked writing a large batch.
  SendStatus send(const std::string& data) {
    SigpipeGuard guard;
    std::size_t off = 0;
    bool reading = true;
    while (off < data.size()) {
      pollfd fds[2] = {{to_child_, POLLOUT, 0}, {from_child_, POLLIN, 0}};
      const int pr = ::poll(fds, reading ? 2 : 1, kResponseTimeoutMs);
      if (pr < 0) {
        if (errno == EINTR) continue;
        return SendStatus::kClosed;
      }
      if (pr == 0) return SendStatus::kTimeout;
      if (reading && (fds[1].revents & (POLLIN | POLLHUP | POLLERR))) {
        char chunk[4096];
        const ssize_t r = ::read(from_child_, chunk, sizeof chunk);
        if (r > 0) buffer_.append(chunk, static_cast<std::size_t>(r));
        else if (r == 0 || (errno != EINTR && errno != EAGAIN)) reading = false;
      }
      if (fds[0].revents & POLLERR) return SendStatus::kClosed;
      if (fds[0].revents & POLLOUT) {
        const ssize_t w = ::write(to_child_, data.data() + off, data.size() - off);
        if (w < 0) {
          if (errno == EINTR || errno == EAGAIN) continue;
          return SendStatus::kClosed;
        }
        off += static_cast<std::size_t>(w);
      }
    }
    return SendStatus::kOk;
  }

  [[noreturn]] void fail(const std::string& reason) {
    broken_ = true;
    broken_reason_ = reason;
    throw ProtocolError(reason);
  }

  double parse_score(std::string line, Index i) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    std::size_t start = 0;
    while (start < line.size() && line[start] == ' ') ++start;
    if (start < line.size() && line[start] == '+') ++start;
    double v = 0;
    const char* first = line.data() + start;
    const char* last = line.data() + line.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (first == last || ec != std::errc() || ptr != last || !std::isfinite(v))
      fail("external model response line " + std::to_string(i + 1) +
           ": non-numeric score '" + line + "'");
    return v;
  }

  ReadStatus read_line(std::string& line) {
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return ReadStatus::kLine;
      }
      pollfd pfd{from_child_, POLLIN, 0};
      const int pr = ::poll(&pfd, 1, kResponseTimeoutMs);
      if (pr == 0) return ReadStatus::kTimeout;
      if (pr < 0) {
        if (errno == EINTR) continue;
        return ReadStatus::kEof;
      }
      char chunk[4096];
      const ssize_t r = ::read(from_child_, chunk, sizeof chunk);
      if (r < 0 && errno == EINTR) continue;
      if (r <= 0) return ReadStatus::kEof;
      buffer_.append(chunk, static_cast<std::size_t>(r));
    }
  }

  std::string exit_status() {
    reap(std::chrono::milliseconds(200));
    if (!exited_) return "still running";
    if (WIFEXITED(status_)) return "exit code " + std::to_string(WEXITSTATUS(status_));
    if (WIFSIGNALED(status_)) return "killed by signal " + std::to_string(WTERMSIG(status_));
    return "terminated";
  }

  void reap(std::chrono::milliseconds grace) {
    if (exited_ || pid_ <= 0) return;
    const auto deadline = std::chrono::steady_clock::now() + grace;
    for (;;) {
      const pid_t r = ::waitpid(pid_, &status_, WNOHANG);
      if (r == pid_ || r < 0) {
        exited_ = true;
        return;
      }
      if (std::chrono::steady_clock::now() >= deadline) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (to_child_ < 0) {  // destructor path: do not leave a zombie behind
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status_, 0);
      exited_ = true;
    }
  }

  std::vector<std::string> argv_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  int status_ = 0;
  bool exited_ = false;
  bool broken_ = false;
  std::string broken_reason_;
  std::string buffer_;
  std::string last_line_;
  std::mutex mutex_;
};

class ExternalModel : public Model {
 public:
  explicit ExternalModel(std::vector<std::string> argv)
      : child_(std::make_unique<ChildProcess>(std::move(argv))) {}
  Vector predict(const Eigen::Ref<const Matrix>& rows) const override {
    return child_->exchange(rows);
  }

 private:
  std::unique_ptr<ChildProcess> child_;
};

}  // namespace

Predictor external_predictor(std::vector<std::string> argv,
                             std::vector<std::string> feature_names) {
  const std::string desc = "external(" + join(argv, " ") + ")";
  return Predictor(std::move(feature_names),
                   std::make_shared<ExternalModel>(std::move(argv)), desc);
}

}  // namespace refx
