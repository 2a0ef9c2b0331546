"""Independent reference implementations used by the tests.

These deliberately avoid the package's array machinery: they walk the raw
snapshots with plain Python and evaluate the risk recursion term by term.
"""


def naive_risk_epoch(graph, r_prev, v, flagged, epoch, rng, mu=0.5, sigma=0.1, pin=True):
    """Dict-based single epoch update with the documented exposure draw layout
    (one draw per ordered pair, by room id, then receiver, then source)."""
    rooms = graph.snapshots.get(epoch, {})
    layout = []
    for room in sorted(rooms):
        members = sorted(rooms[room])
        for i in members:
            for j in members:
                if i != j:
                    layout.append((i, j))
    draws = rng.normal(mu, sigma, size=len(layout)) if layout else []
    exposure = {pair: max(0.0, float(x)) for pair, x in zip(layout, draws)}

    new = {}
    for i in r_prev:
        room = None
        for name, members in rooms.items():
            if i in members:
                room = name
        neighbours = sorted(rooms[room] - {i}) if room is not None else []
        num = v[i] * r_prev[i]
        den = 1.0
        for j in neighbours:
            num += 1.0 * (exposure[(i, j)] + r_prev[j])
            den += 1.0
        value = num / den
        if pin and flagged[i]:
            value = max(value, 2.0)
        new[i] = value
    return new


def brute_median(values):
    s = sorted(values)
    n = len(s)
    if n % 2:
        return s[n // 2]
    return (s[n // 2 - 1] + s[n // 2]) / 2
