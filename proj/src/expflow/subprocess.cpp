#include "expflow/subprocess.hpp"

#include "expflow/error.hpp"

#include <cerrno>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace expflow {
namespace {

struct Pipe {
    int fds[2] = {-1, -1};
    Pipe() {
        if (pipe(fds) != 0)
            throw Error(Errc::io_error, std::string("pipe: ") + std::strerror(errno));
    }
    ~Pipe() {
        close_read();
        close_write();
    }
    int read_fd() const { return fds[0]; }
    int write_fd() const { return fds[1]; }
    void close_read() {
        if (fds[0] >= 0) ::close(fds[0]);
        fds[0] = -1;
    }
    void close_write() {
        if (fds[1] >= 0) ::close(fds[1]);
        fds[1] = -1;
    }
};

int normalize_status(int status) {
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return -1;
}

// Forks and execs; exec_pipe (close-on-exec) carries errno back on failure.
pid_t spawn(const std::vector<std::string>& argv, const std::string& cwd,
            const std::map<std::string, std::string>& extra_env, Pipe& out_pipe,
            Pipe& err_pipe) {
    Pipe exec_pipe;
    fcntl(exec_pipe.write_fd(), F_SETFD, FD_CLOEXEC);

    std::vector<char*> cargv;
    cargv.reserve(argv.size() + 1);
    for (const auto& a : argv)
        cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);

    pid_t pid = fork();
    if (pid < 0)
        throw Error(Errc::spawn_failed, std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        dup2(out_pipe.write_fd(), STDOUT_FILENO);
        dup2(err_pipe.write_fd(), STDERR_FILENO);
        out_pipe.close_read();
        out_pipe.close_write();
        err_pipe.close_read();
        err_pipe.close_write();
        exec_pipe.close_read();
        if (!cwd.empty() && chdir(cwd.c_str()) != 0) {
            int e = errno;
            (void)!write(exec_pipe.write_fd(), &e, sizeof e);
            _exit(127);
        }
        for (const auto& [k, v] : extra_env)
            setenv(k.c_str(), v.c_str(), 1);
        execvp(cargv[0], cargv.data());
        int e = errno;
        (void)!write(exec_pipe.write_fd(), &e, sizeof e);
        _exit(127);
    }

    out_pipe.close_write();
    err_pipe.close_write();
    exec_pipe.close_write();
    int child_errno = 0;
    ssize_t n = read(exec_pipe.read_fd(), &child_errno, sizeof child_errno);
    if (n > 0) {
        int status = 0;
        waitpid(pid, &status, 0);
        throw Error(Errc::spawn_failed,
                    "cannot execute '" + argv[0] + "': " + std::strerror(child_errno));
    }
    return pid;
}

// Reads both pipes to EOF, dispatching complete lines to the sink.
void pump(Pipe& out_pipe, Pipe& err_pipe, const LineSink& sink) {
    std::string buf_out, buf_err;
    auto flush_lines = [&](std::string& buf, char tag) {
        size_t start = 0;
        size_t nl;
        while ((nl = buf.find('\n', start)) != std::string::npos) {
            sink(tag, buf.substr(start, nl - start));
            start = nl + 1;
        }
        buf.erase(0, start);
    };

    bool out_open = true, err_open = true;
    char chunk[4096];
    while (out_open || err_open) {
        struct pollfd pfds[2];
        nfds_t n = 0;
        if (out_open) pfds[n++] = {out_pipe.read_fd(), POLLIN, 0};
        if (err_open) pfds[n++] = {err_pipe.read_fd(), POLLIN, 0};
        if (poll(pfds, n, -1) < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (nfds_t i = 0; i < n; ++i) {
            if (!(pfds[i].revents & (POLLIN | POLLHUP))) continue;
            bool is_out = pfds[i].fd == out_pipe.read_fd();
            ssize_t got = read(pfds[i].fd, chunk, sizeof chunk);
            if (got > 0) {
                (is_out ? buf_out : buf_err).append(chunk, static_cast<size_t>(got));
                flush_lines(is_out ? buf_out : buf_err, is_out ? 'O' : 'E');
            } else {
                if (is_out) out_open = false;
                else err_open = false;
            }
        }
    }
    if (!buf_out.empty()) sink('O', buf_out);
    if (!buf_err.empty()) sink('E', buf_err);
}

} // namespace

int run_capture(const std::vector<std::string>& argv, const std::string& cwd,
                const std::map<std::string, std::string>& extra_env,
                std::string* out, std::string* err) {
    Pipe out_pipe, err_pipe;
    pid_t pid = spawn(argv, cwd, extra_env, out_pipe, err_pipe);
    // Raw byte capture; no line splitting.
    bool out_open = true, err_open = true;
    char chunk[4096];
    while (out_open || err_open) {
        struct pollfd pfds[2];
        nfds_t n = 0;
        if (out_open) pfds[n++] = {out_pipe.read_fd(), POLLIN, 0};
        if (err_open) pfds[n++] = {err_pipe.read_fd(), POLLIN, 0};
        if (poll(pfds, n, -1) < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (nfds_t i = 0; i < n; ++i) {
            if (!(pfds[i].revents & (POLLIN | POLLHUP))) continue;
            bool is_out = pfds[i].fd == out_pipe.read_fd();
            ssize_t got = read(pfds[i].fd, chunk, sizeof chunk);
            if (got > 0) {
                std::string* dst = is_out ? out : err;
                if (dst) dst->append(chunk, static_cast<size_t>(got));
            } else {
                if (is_out) out_open = false;
                else err_open = false;
            }
        }
    }
    int status = 0;
    waitpid(pid, &status, 0);
    return normalize_status(status);
}

int run_shell(const std::string& command, const std::string& cwd,
              const std::map<std::string, std::string>& extra_env,
              const LineSink& sink) {
    Pipe out_pipe, err_pipe;
    pid_t pid = spawn({"/bin/sh", "-c", command}, cwd, extra_env, out_pipe, err_pipe);
    pump(out_pipe, err_pipe, sink);
    int status = 0;
    waitpid(pid, &status, 0);
    return normalize_status(status);
}

} // namespace expflow
