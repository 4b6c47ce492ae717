"""Quick end-to-end check of the Python bindings.

Build and install first, for example:
    maturin build -m crates/py/Cargo.toml --release -o dist && pip install dist/asmstarve-*.whl
"""

import asmstarve


def main():
    names = asmstarve.corpus()
    assert "dining_philosophers" in names, names

    dp = asmstarve.dining_philosophers(5)
    assert dp.agents == ["p1", "p2", "p3", "p4", "p5"]
    assert dp.risky_functions() == ["owner"]
    assert dp.validate() == []

    report = dp.analyze()
    vulnerable = [r["id"] for r in report["rules"] if r["verdict"] == "vulnerable"]
    assert vulnerable == ["RULE 1"], vulnerable
    assert report["certificate"] is False

    same = asmstarve.Model.parse(dp.pretty())
    assert same.pretty() == dp.pretty()

    model, env = asmstarve.aodv(hosts=2, topology="none", timeout=5)
    assert model.analyze(env=env)["certificate"] is True

    trace = dp.run(steps=100, scheduler="random", seed=3)
    assert trace == dp.run(steps=100, scheduler="random", seed=3)
    assert len(trace.splitlines()) == 100

    explored = asmstarve.dining_philosophers(2).explore(depth=12)
    assert explored["inconsistent"] == [] and not explored["truncated"]

    model, env = asmstarve.corpus_entry("aodv_no_timeout")
    alarms = asmstarve.monitor(model.run(steps=100, env=env), "waiting", 20)["alarms"]
    assert [a["agent"] for a in alarms] == ["h1"], alarms

    try:
        asmstarve.Model.parse("dasm X\ndomain d = {a\n")
    except ValueError:
        pass
    else:
        raise AssertionError("parse error not raised")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
