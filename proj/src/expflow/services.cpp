#include "expflow/services.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace expflow {

using json = nlohmann::json;
using namespace std::chrono_literals;

namespace {

constexpr size_t kQueueBound = 10000;
constexpr auto kDrainDeadline = 5s;

std::string now_rfc3339() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  now.time_since_epoch()) %
              1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[80];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms.count()));
    return out;
}

// Shared worker-thread scaffolding: bounded FIFO queue, drain-on-stop.
template <typename Event>
class QueueWorker {
public:
    ~QueueWorker() { join(); }

    void launch(std::function<void(const Event&)> handler) {
        handler_ = std::move(handler);
        worker_ = std::thread([this] { loop(); });
    }

    // Returns false (dropping the event) when the queue is full.
    bool enqueue(Event event) {
        {
            std::lock_guard lock(mu_);
            if (queue_.size() >= kQueueBound) {
                ++dropped_;
                return false;
            }
            queue_.push_back(std::move(event));
        }
        cv_.notify_one();
        return true;
    }

    // Drains until empty or the deadline passes; returns true on timeout.
    bool drain_and_stop() {
        auto deadline = std::chrono::steady_clock::now() + kDrainDeadline;
        {
            std::lock_guard lock(mu_);
            stopping_ = true;
            deadline_ = deadline;
        }
        cv_.notify_one();
        join();
        std::lock_guard lock(mu_);
        return !queue_.empty();
    }

    size_t dropped() const { return dropped_; }
    size_t handled() const { return handled_; }

private:
    std::deque<Event> queue_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::thread worker_;
    std::function<void(const Event&)> handler_;
    bool stopping_ = false;
    std::chrono::steady_clock::time_point deadline_;
    std::atomic<size_t> dropped_{0};
    std::atomic<size_t> handled_{0};

    void loop() {
        std::unique_lock lock(mu_);
        while (true) {
            cv_.wait_for(lock, 50ms, [this] { return !queue_.empty() || stopping_; });
            while (!queue_.empty()) {
                if (stopping_ && std::chrono::steady_clock::now() > deadline_) return;
                Event ev = std::move(queue_.front());
                queue_.pop_front();
                lock.unlock();
                handler_(ev);
                ++handled_;
                lock.lock();
            }
            if (stopping_) return;
        }
    }

    void join() {
        if (worker_.joinable()) worker_.join();
    }
};

class MetricsService final : public Service {
public:
    MetricsService(std::string name, std::map<std::string, std::string> config)
        : name_(std::move(name)), config_(std::move(config)) {}

    const std::string& name() const override { return name_; }

    void start(const std::filesystem::path& log_dir) override {
        std::filesystem::create_directories(log_dir);
        out_path_ = log_dir / "metrics.jsonl";
        inbox_path_ = log_dir / "metrics.inbox";
        out_.open(out_path_, std::ios::app | std::ios::binary);
        if (!out_)
            throw Error(Errc::service_start_failed,
                        "metrics service '" + name_ + "': cannot open " +
                            out_path_.string());
        worker_ = std::make_unique<QueueWorker<MetricsEvent>>();
        worker_->launch([this](const MetricsEvent& ev) { write(ev); });
        tail_stop_ = false;
        tailer_ = std::thread([this] { tail_inbox(); });
        running_ = true;
    }

    StopReport stop() override {
        StopReport report;
        report.service = name_;
        if (!running_) return report;
        running_ = false;
        tail_stop_ = true;
        if (tailer_.joinable()) tailer_.join();
        report.timed_out = worker_->drain_and_stop();
        report.dropped = worker_->dropped();
        report.delivered = worker_->handled();
        out_.flush();
        out_.close();
        if (monotonicity_warnings_ > 0)
            std::cerr << "warning: metrics service '" << name_ << "': "
                      << monotonicity_warnings_
                      << " event(s) with non-monotone step\n";
        return report;
    }

    void log_metric(const MetricsEvent& event) override {
        if (!running_) return;
        if (!std::isfinite(event.value))
            throw Error(Errc::invalid_metric,
                        "metric '" + event.name + "' has a non-finite value");
        MetricsEvent ev = event;
        if (ev.ts.empty()) ev.ts = now_rfc3339();
        check_monotone(ev);
        if (!worker_->enqueue(std::move(ev)))
            std::cerr << "warning: metrics queue full; event dropped\n";
    }

private:
    std::string name_;
    std::map<std::string, std::string> config_;
    std::filesystem::path out_path_, inbox_path_;
    std::ofstream out_;
    std::unique_ptr<QueueWorker<MetricsEvent>> worker_;
    std::thread tailer_;
    std::atomic<bool> tail_stop_{false};
    bool running_ = false;
    std::map<std::string, long> last_step_;
    std::mutex step_mu_;
    size_t monotonicity_warnings_ = 0;

    void check_monotone(const MetricsEvent& ev) {
        std::lock_guard lock(step_mu_);
        auto it = last_step_.find(ev.name);
        if (it != last_step_.end() && ev.step < it->second) ++monotonicity_warnings_;
        last_step_[ev.name] = std::max(ev.step, it == last_step_.end() ? ev.step
                                                                       : it->second);
    }

    void write(const MetricsEvent& ev) {
        json line{{"name", ev.name}, {"step", ev.step}, {"value", ev.value},
                  {"ts", ev.ts}};
        out_ << line.dump() << '\n';
        out_.flush();
    }

    // Stages may append `{"name":...,"step":...,"value":...}` lines to
    // metrics.inbox; they are picked up here and stamped with a timestamp.
    void tail_inbox() {
        std::streamoff offset = 0;
        while (true) {
            bool final_sweep = tail_stop_.load();
            std::ifstream in(inbox_path_, std::ios::binary);
            if (in) {
                in.seekg(offset);
                std::string line;
                while (std::getline(in, line)) {
                    offset = in.tellg() == std::streampos(-1)
                                 ? offset + static_cast<std::streamoff>(line.size() + 1)
                                 : static_cast<std::streamoff>(in.tellg());
                    if (line.empty()) continue;
                    json j = json::parse(line, nullptr, false);
                    if (j.is_discarded() || !j.contains("name") ||
                        !j.contains("value")) {
                        std::cerr << "warning: bad metrics.inbox line ignored\n";
                        continue;
                    }
                    MetricsEvent ev;
                    ev.name = j["name"].get<std::string>();
                    ev.step = j.value("step", 0L);
                    ev.value = j["value"].get<double>();
                    ev.ts = now_rfc3339();
                    if (std::isfinite(ev.value)) worker_->enqueue(std::move(ev));
                }
            }
            if (final_sweep) return;
            std::this_thread::sleep_for(25ms);
        }
    }
};

class WebhookNotifierService final : public Service {
public:
    WebhookNotifierService(std::string name, std::map<std::string, std::string> config)
        : name_(std::move(name)), config_(std::move(config)) {}

    const std::string& name() const override { return name_; }

    void start(const std::filesystem::path& log_dir) override {
        auto it = config_.find("url");
        if (it == config_.end() || it->second.empty())
            throw Error(Errc::service_start_failed,
                        "notifier '" + name_ + "' has no url configured");
        url_ = it->second;
        if (auto d = config_.find("retry_delay_ms"); d != config_.end())
            retry_delay_ = std::chrono::milliseconds(std::stol(d->second));
        std::filesystem::create_directories(log_dir);
        log_.open(log_dir / "services.log", std::ios::app | std::ios::binary);
        worker_ = std::make_unique<QueueWorker<Notification>>();
        worker_->launch([this](const Notification& n) { deliver(n); });
        running_ = true;
    }

    StopReport stop() override {
        StopReport report;
        report.service = name_;
        if (!running_) return report;
        running_ = false;
        report.timed_out = worker_->drain_and_stop();
        report.dropped = worker_->dropped();
        report.delivered = worker_->handled();
        log_.close();
        return report;
    }

    void notify(const Notification& n) override {
        if (!running_) return;
        worker_->enqueue(n);
    }

private:
    std::string name_;
    std::map<std::string, std::string> config_;
    std::string url_;
    std::chrono::milliseconds retry_delay_{2000};
    std::ofstream log_;
    std::unique_ptr<QueueWorker<Notification>> worker_;
    bool running_ = false;
    std::mutex log_mu_;

    void deliver(const Notification& n) {
        json payload = json::object();
        for (const auto& [k, v] : n.payload) payload[k] = v;
        json body{{"event", notify_event_name(n.event)},
                  {"run_id", n.run_id},
                  {"payload", payload}};
        std::string text = body.dump();
        if (text.size() > 64 * 1024) {
            record(n, "skipped: payload over 64 KiB");
            return;
        }
        if (post(text)) {
            record(n, "delivered");
            return;
        }
        std::this_thread::sleep_for(retry_delay_);
        record(n, post(text) ? "delivered after retry" : "delivery failed");
    }

    bool post(const std::string& body) {
        // url_ = scheme://host[:port][/path]
        size_t scheme_end = url_.find("://");
        if (scheme_end == std::string::npos) return false;
        size_t path_start = url_.find('/', scheme_end + 3);
        std::string origin = path_start == std::string::npos
                                 ? url_
                                 : url_.substr(0, path_start);
        std::string path = path_start == std::string::npos ? "/"
                                                           : url_.substr(path_start);
        httplib::Client client(origin);
        client.set_connection_timeout(2, 0);
        client.set_read_timeout(2, 0);
        auto res = client.Post(path, body, "application/json");
        return res && res->status >= 200 && res->status < 300;
    }

    void record(const Notification& n, const std::string& outcome) {
        std::lock_guard lock(log_mu_);
        if (log_)
            log_ << now_rfc3339() << " notifier " << name_ << " "
                 << notify_event_name(n.event) << ": " << outcome << '\n';
        log_.flush();
        if (outcome == "delivery failed")
            std::cerr << "warning: notifier '" << name_ << "' could not deliver "
                      << notify_event_name(n.event) << '\n';
    }
};

} // namespace

const char* notify_event_name(NotifyEvent e) {
    switch (e) {
    case NotifyEvent::run_started: return "run_started";
    case NotifyEvent::stage_finished: return "stage_finished";
    case NotifyEvent::run_finished: return "run_finished";
    case NotifyEvent::run_failed: return "run_failed";
    }
    return "?";
}

std::vector<std::unique_ptr<Service>> make_services(
    const std::vector<ServiceSpec>& specs) {
    std::vector<std::unique_ptr<Service>> out;
    for (const auto& spec : specs) {
        switch (spec.kind) {
        case BehaviorKind::metrics_logger:
            out.push_back(std::make_unique<MetricsService>(spec.name, spec.config));
            break;
        case BehaviorKind::webhook_notifier:
            out.push_back(
                std::make_unique<WebhookNotifierService>(spec.name, spec.config));
            break;
        default:
            throw Error(Errc::service_start_failed,
                        "object '" + spec.name + "' is not a service kind");
        }
    }
    return out;
}

void ServiceGroup::start_all(const std::filesystem::path& log_dir) {
    size_t started = 0;
    try {
        for (; started < services_.size(); ++started)
            services_[started]->start(log_dir);
    } catch (const Error& e) {
        // Roll back whatever is already up, newest first.
        for (size_t i = started; i-- > 0;) services_[i]->stop();
        throw Error(Errc::service_start_failed,
                    std::string("service '") + services_[started]->name() +
                        "' failed to start: " + e.what());
    }
    started_ = true;
    stopped_ = false;
}

std::vector<StopReport> ServiceGroup::stop_all() {
    std::vector<StopReport> reports;
    if (!started_ || stopped_) return reports;
    stopped_ = true;
    for (size_t i = services_.size(); i-- > 0;)
        reports.push_back(services_[i]->stop());
    return reports;
}

void ServiceGroup::log_metric(const MetricsEvent& event) {
    for (auto& s : services_) s->log_metric(event);
}

void ServiceGroup::notify(const Notification& n) {
    for (auto& s : services_) s->notify(n);
}

std::vector<ServiceSpec> collect_service_specs(
    const ResolvedDocument& doc, const TypeRegistry& registry,
    const std::vector<std::string>& service_names) {
    std::vector<ServiceSpec> out;
    for (const auto& name : service_names) {
        const NodePtr* node = doc.find(name);
        if (!node)
            throw Error(Errc::service_start_failed,
                        "service '" + name + "' is not defined");
        const TypeDescriptor* desc =
            (*node)->type_tag.empty() ? nullptr : registry.find((*node)->type_tag);
        if (!desc)
            throw Error(Errc::service_start_failed,
                        "service '" + name + "' has no registered service kind");
        ServiceSpec spec;
        spec.name = name;
        spec.kind = desc->behavior_binding;
        if (spec.kind != BehaviorKind::metrics_logger &&
            spec.kind != BehaviorKind::webhook_notifier)
            throw Error(Errc::service_start_failed,
                        "service '" + name + "' binds to '" +
                            behavior_kind_name(spec.kind) +
                            "', which is not a service kind");
        for (const auto& [k, v] : (*node)->entries)
            if (v->is_scalar()) spec.config[k] = v->to_string();
        out.push_back(std::move(spec));
    }
    return out;
}

} // namespace expflow
