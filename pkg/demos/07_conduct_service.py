"""Driving the trial-conduct HTTP service.

Creates a trial over the JSON API, submits cohort outcomes with optimistic
versioning, previews a hypothetical cohort, and shows that the persisted
event log replays to the same recommendation.
"""

import json
import tempfile

from fastapi.testclient import TestClient

from dosefind.service import create_app

design = {
    "kind": "efftox",
    "doses": [25, 50, 100, 200, 400],
    "model": {"outcome": "bivariate", "link": "probit", "joint": "gumbel"},
    "limits": {"eff_floor": 0.2, "tox_ceiling": 0.35, "p_eff": 0.9, "p_tox": 0.9},
    "tradeoff_pairs": [[0.2, 0.08], [0.45, 0.25], [0.7, 0.6]],
    "cohort_size": 3,
    "n_max": 12,
}

with tempfile.TemporaryDirectory() as tmp:
    client = TestClient(create_app(tmp))

    created = client.post(
        "/trials", json={"design": design, "mcmc": {"seed": 2024, "iterations": 2000, "burnin": 800}}
    ).json()
    tid = created["id"]
    print(f"created {tid}: start treatment {created['recommendation']['treatment']}")
    print(f"log version {created['version']} (first cohort enrolled)")

    # what if the whole first cohort had toxicity?
    preview = client.post(
        f"/trials/{tid}/preview",
        json={"outcomes": [{"patient": i, "eff": 0, "tox": 1} for i in range(3)]},
    ).json()
    print(f"\nwhat-if all-toxicity preview: {preview['action']} {preview.get('treatment')}")

    # the real outcomes are milder
    submitted = client.post(
        f"/trials/{tid}/outcomes",
        json={"outcomes": [
            {"patient": 0, "eff": 1, "tox": 0},
            {"patient": 1, "eff": 0, "tox": 0},
            {"patient": 2, "eff": 1, "tox": 0},
        ]},
        headers={"If-Match": str(created["version"])},
    ).json()
    print(f"\nsubmitted cohort 1: next treatment {submitted['recommendation']['treatment']}")

    # a stale writer is refused and nothing is overwritten
    stale = client.post(
        f"/trials/{tid}/outcomes",
        json={"outcomes": [{"patient": 0, "eff": 0, "tox": 1}]},
        headers={"If-Match": str(created["version"])},
    )
    print(f"stale write: HTTP {stale.status_code} ({stale.json()['code']})")

    posterior = client.get(f"/trials/{tid}/posterior").json()
    print("\nper-dose posterior summary:")
    for row in posterior["doses"]:
        print(
            f"  {row['treatment']}: E[eff]={row['mean_eff']:.3f} "
            f"E[tox]={row['mean_tox']:.3f} delta={row['desirability']:.3f} "
            f"acceptable={row['acceptable']}"
        )

    events = client.get(f"/trials/{tid}/events").json()
    print(f"\nevent log at version {events['version']}:")
    for e in events["events"][:6]:
        print("  " + json.dumps(e, sort_keys=True))
    print("  ...")
