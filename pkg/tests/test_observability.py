import unittest
from unittest.mock import patch

from config.settings import load_settings
from infra.observability import configure_observability, observability_enabled, stage_span


class TestObservability(unittest.TestCase):
    @patch("infra.observability.logfire.configure")
    def test_configure_observability_without_backend_stays_local(self, configure_mock):
        settings = load_settings({})

        configure_observability(settings)

        self.assertFalse(observability_enabled(settings))
        configure_mock.assert_called_once_with(
            service_name="twoscale-lab",
            send_to_logfire=False,
            console=False,
        )

    @patch("infra.observability.logfire.configure")
    def test_configure_observability_uses_console_backend(self, configure_mock):
        settings = load_settings({"OBS_BACKEND": "Console"})

        configure_observability(settings)

        self.assertTrue(observability_enabled(settings))
        configure_mock.assert_called_once_with(service_name="twoscale-lab", send_to_logfire=False)

    @patch("infra.observability.logfire.configure")
    def test_configure_observability_uses_logfire_backend(self, configure_mock):
        settings = load_settings({"OBS_BACKEND": "logfire", "OBS_SERVICE_NAME": "desk"})

        configure_observability(settings)

        configure_mock.assert_called_once_with(service_name="desk")

    @patch("infra.observability.logfire.configure")
    def test_configure_observability_rejects_unknown_backend(self, configure_mock):
        settings = load_settings({"OBS_BACKEND": "langfuse"})

        with self.assertRaisesRegex(ValueError, "Unsupported OBS_BACKEND"):
            configure_observability(settings)
        configure_mock.assert_not_called()

    @patch("infra.observability.logfire.warn")
    @patch("infra.observability.logfire.span")
    def test_stage_span_names_stage(self, span_mock, warn_mock):
        with stage_span("limit", n_paths=10):
            pass

        span_mock.assert_called_once_with("stage {stage}", stage="limit", n_paths=10)
        warn_mock.assert_not_called()

    @patch("infra.observability.logfire.warn")
    @patch("infra.observability.logfire.span")
    def test_stage_span_warns_and_reraises(self, span_mock, warn_mock):
        with self.assertRaisesRegex(RuntimeError, "boom"):
            with stage_span("lambda"):
                raise RuntimeError("boom")

        warn_mock.assert_called_once_with(
            "stage {stage} failed: {error}", stage="lambda", error="boom"
        )


if __name__ == "__main__":
    unittest.main()
