// JSON-over-HTTP front end for feedback_service.
//
//   GET  /api/forms/next            serve the next pending form
//   GET  /api/forms/{id}            serve a specific form
//   POST /api/forms/{id}/marking    submit {"verdicts": [...]}
//   GET  /api/progress              counts and timing statistics

#ifndef SEMPARSE_FEEDBACK_HTTP_HPP
#define SEMPARSE_FEEDBACK_HTTP_HPP

#include <string>

// before httplib.h: <resolv.h> defines _res
#include <semparse/feedback_service.hpp>

#include <httplib.h>
#include <json.hpp>

namespace semparse {

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, nlohmann::ordered_json{{"error", message}, {"status", status}});
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const service_error& e) {
    send_error(res, e.status(), e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 400, e.what());
  } catch (const std::invalid_argument& e) {
    send_error(res, 400, e.what());
  }
}

}  // namespace detail

inline void register_feedback_routes(httplib::Server& server, feedback_service& svc) {
  server.Get("/api/forms/next", [&svc](const httplib::Request&, httplib::Response& res) {
    detail::guarded(res, [&] {
      auto id = svc.next_form_id();
      if (!id) throw service_error(404, "no pending forms");
      detail::send_json(res, 200, to_json(svc.serve_form(*id)));
    });
  });

  server.Get(R"(/api/forms/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] { detail::send_json(res, 200, to_json(svc.serve_form(req.matches[1]))); });
  });

  server.Post(R"(/api/forms/([^/]+)/marking)", [&svc](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      const std::string id = req.matches[1];
      svc.form(id);  // 404 before body validation
      const auto m = marking_from_json(nlohmann::json::parse(req.body));
      const auto r = svc.submit_marking(id, m);
      nlohmann::ordered_json ack;
      ack["form_id"] = id;
      ack["accepted"] = true;
      ack["record"] = to_json(r);
      detail::send_json(res, 200, ack);
    });
  });

  server.Get("/api/progress", [&svc](const httplib::Request&, httplib::Response& res) {
    detail::send_json(res, 200, to_json(svc.progress()));
  });
}

}  // namespace semparse

#endif  // SEMPARSE_FEEDBACK_HTTP_HPP
