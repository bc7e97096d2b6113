// Copyright 2026 The wmaudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <sys/types.h>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wmaudit::channel {

/// A child process with line-oriented stdin/stdout pipes. stderr is inherited.
/// POSIX only.
class Subprocess {
 public:
  /// fork + execvp. Throws kChannelLaunch if the program cannot be executed.
  explicit Subprocess(const std::vector<std::string>& argv);
  /// Kills (SIGKILL) and reaps the child if it is still running.
  ~Subprocess();
  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  /// Throws kChannelAborted if the child has closed its stdin.
  void write_line(std::string_view line);
  /// Next newline-terminated line without the newline; nullopt on EOF.
  /// Throws kChannelTimeout after `timeout_s`.
  std::optional<std::string> read_line(double timeout_s);

  /// Exit status once the child has exited within `timeout_s`; nullopt on
  /// timeout. A signal death is reported as 128 + signo.
  std::optional<int> wait(double timeout_s);
  void kill();
  bool running();
  pid_t pid() const { return pid_; }

 private:
  void close_stdin();

  pid_t pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  std::string buffer_;
  bool eof_ = false;
  std::optional<int> status_;
};

}  // namespace wmaudit::channel
