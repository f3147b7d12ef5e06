"""Collect the ward-style tests in this directory under pytest.

The suite is written for ward (``@test("description")``). This bridge lets
``pytest`` discover and run those same tests through ward's own runner; it
does not change any test body or assertion.
"""

import pytest
from ward._collect import get_tests_in_modules
from ward._fixtures import FixtureCache
from ward.models import Scope
from ward.testing import TestOutcome

_CACHE = FixtureCache()


class WardTestFailure(Exception):
    pass


class WardItem(pytest.Item):
    def __init__(self, *, ward_test, **kwargs):
        super().__init__(**kwargs)
        self.ward_test = ward_test

    def runtest(self):
        result = self.ward_test.run(_CACHE)
        teardown = _CACHE.teardown_fixtures_for_scope(
            Scope.Test, scope_key=self.ward_test.id, capture_output=True
        )
        if result.outcome == TestOutcome.SKIP:
            pytest.skip(result.message or "skipped by ward")
        if result.outcome in (TestOutcome.FAIL, TestOutcome.XPASS):
            if result.error is not None:
                raise result.error
            raise WardTestFailure(f"ward outcome: {result.outcome.name}")
        for r in teardown:
            if r.captured_exception is not None:
                raise r.captured_exception

    def reportinfo(self):
        return self.path, self.ward_test.line_number - 1, self.name


class WardModule(pytest.Module):
    def collect(self):
        module = self.obj
        for ward_test in get_tests_in_modules([module], capture_output=True):
            for instance in ward_test.get_parameterised_instances():
                yield WardItem.from_parent(
                    self,
                    name=f"{instance.line_number}: {instance.description}",
                    ward_test=instance,
                )


def pytest_pycollect_makemodule(module_path, parent):
    return WardModule.from_parent(parent, path=module_path)


def pytest_sessionfinish(session, exitstatus):
    _CACHE.teardown_global_fixtures(capture_output=True)
