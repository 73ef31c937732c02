#pragma once

#include "expflow/error.hpp"
#include "expflow/registry.hpp"
#include "expflow/resolver.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace expflow {

struct ServiceSpec {
    std::string name;
    BehaviorKind kind = BehaviorKind::metrics_logger;
    std::map<std::string, std::string> config;
};

struct MetricsEvent {
    std::string name;
    long step = 0;
    double value = 0.0;
    std::string ts; // filled at enqueue when empty
};

enum class NotifyEvent { run_started, stage_finished, run_finished, run_failed };

const char* notify_event_name(NotifyEvent e);

struct Notification {
    NotifyEvent event = NotifyEvent::run_started;
    std::string run_id;
    std::map<std::string, std::string> payload;
};

struct StopReport {
    std::string service;
    bool timed_out = false;
    size_t dropped = 0;   // events rejected on a full queue
    size_t delivered = 0; // lines written / posts attempted
};

// One lifecycle-managed auxiliary service. Implementations own a worker
// thread consuming a bounded queue; producers only enqueue.
class Service {
public:
    virtual ~Service() = default;
    virtual const std::string& name() const = 0;
    virtual void start(const std::filesystem::path& log_dir) = 0;
    virtual StopReport stop() = 0; // idempotent; drains with a deadline
    virtual void log_metric(const MetricsEvent& event) { (void)event; }
    virtual void notify(const Notification& n) { (void)n; }
};

// Instantiates services for the given specs. Unknown kinds throw
// ServiceStartError before anything starts.
std::vector<std::unique_ptr<Service>> make_services(
    const std::vector<ServiceSpec>& specs);

// Group lifecycle: start in declaration order with rollback (reverse-order
// stop of whatever already started) when one fails; stop in reverse order.
class ServiceGroup {
public:
    ServiceGroup() = default;
    explicit ServiceGroup(std::vector<std::unique_ptr<Service>> services)
        : services_(std::move(services)) {}

    // Throws ServiceStartError naming the failing service.
    void start_all(const std::filesystem::path& log_dir);

    // Reverse start order; second call returns empty.
    std::vector<StopReport> stop_all();

    // Fans out to every metrics-capable service. Throws InvalidMetricError
    // for non-finite values; a full queue drops the event with a counted
    // warning instead of blocking.
    void log_metric(const MetricsEvent& event);

    // Never throws into the pipeline; delivery failures are logged warnings.
    void notify(const Notification& n);

    size_t size() const { return services_.size(); }
    bool started() const { return started_; }

private:
    std::vector<std::unique_ptr<Service>> services_;
    bool started_ = false;
    bool stopped_ = false;
};

// Reads service specs for a pipeline from the resolved document.
std::vector<ServiceSpec> collect_service_specs(
    const ResolvedDocument& doc, const TypeRegistry& registry,
    const std::vector<std::string>& service_names);

} // namespace expflow
