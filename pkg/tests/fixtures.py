"""Golden dialogue fixtures used across the engine, success, and acceptance tests.

Three canonical interactive dialogues: a successful booking, a premature
termination, and a conversational loop with an off-goal hallucination.
Scripts hold the raw provider outputs (user-side scripts include the
end-of-dialogue token where it was emitted).
"""

from todsim.dialogue import Exemplar, make_turns
from todsim.goals import parse_goal

END = "<end_dialog>"

SUCCESSFUL_GOAL = parse_goal(
    "{'train': {'info': {'leaveAt': '20:30', 'destination': 'cambridge', "
    "'day': 'friday', 'departure': 'leicester'}, 'reqt': ['duration']}}")

SUCCESSFUL_USER_SCRIPT = [
    "I would like to book a train from leicester to cambridge on friday.",
    "I would like to leave at 20:30.",
    "yes, please.",
    "2",
    f"thank you. {END}",
]

SUCCESSFUL_TOD_SCRIPT = [
    "there are [value_choice] trains that meet your criteria . do you have a time "
    "you would like to leave or arrive by ?",
    "I have train [value_id] leaving at [value_leave] and arriving at [value_arrive] . "
    "would you like me to book that for you ?",
    "how many tickets do you need ?",
    "I have booked you [value_people] ticket on [value_id] . your reference number "
    "is [value_reference] .",
]

PREMATURE_GOAL = parse_goal(
    "{'hotel': {'info': {'name': 'city centre north b and b'}, 'reqt': ['parking']}, "
    "'train': {'info': {'destination': 'cambridge', 'day': 'sunday', 'arriveBy': '14:00', "
    "'departure': 'broxbourne'}, 'reqt': ['duration', 'leaveAt', 'price']}}")

PREMATURE_USER_SCRIPT = [
    "I am looking for a hotel in cambridge.",
    "I would prefer to stay in the centre, anything in the moderate price range would be fine.",
    "yes please.",
    "I am travelling with my wife and I will be arriving on sunday and staying for 1 night.",
    "no that seems to be everything. thank you!",
    f"bye {END}",
]

PREMATURE_TOD_SCRIPT = [
    "there are [value_choice] [value_type] in cambridge . do you have a price range "
    "or area in mind ?",
    "I have [value_choice] [value_type] that meet your criteria . would you like me "
    "to book 1 for you ?",
    "I would be happy to book you a room . first , can you tell me how many people "
    "will be staying , what day you will be arriving , and how many nights you will "
    "be staying ?",
    "I have booked you at the [value_name] . your reference number is [value_reference] . "
    "is there anything else I can help you with ?",
    "you are welcome . have a great day .",
]

LOOP_GOAL = parse_goal(
    "{'restaurant': {'info': {'food': 'european', 'pricerange': 'expensive'}, "
    "'reqt': ['address', 'phone', 'area']}}")

_TABLE = "yes, thank you. a table for 3 at 12:30 on saturday."
_CINEMA = "I also want to go to a cinema in the centre."
_BOOKED = "I have booked you at [value_name] . your reference number is [value_reference] ."
_BOOK_ONE = ("I have [value_choice] [value_type] in the [value_area] . "
             "would you like me to book 1 for you ?")

LOOP_USER_SCRIPT = [
    "I am looking for a place to dine in the expensive price range which serves european food.",
    _TABLE,
    _CINEMA,
    "I will go with that.",
    _TABLE,
    _CINEMA,
    _TABLE,
    _CINEMA,
    _TABLE,
    _CINEMA,
]

LOOP_TOD_SCRIPT = [
    "I have [value_choice] restaurant -s that meet your criteria . would you like to "
    "narrow it down by area ?",
    _BOOKED,
    "I have [value_choice] [value_type] in the [value_area] . [value_name] is a great 1 .",
    "would you like me to book that for you ?",
    _BOOKED,
    _BOOK_ONE,
    _BOOKED,
    _BOOK_ONE,
    _BOOKED,
    _BOOK_ONE,
]

HALLUCINATION_LEXICON = {
    "attraction": ["cinema", "museum", "theatre", "park"],
    "taxi": ["taxi", "cab"],
}


def zipper(users, systems):
    """Interleave user/system utterance lists into a single turn-text list."""
    out = []
    for i, user in enumerate(users):
        out.append(user)
        if i < len(systems):
            out.append(systems[i])
    return out


def interleaved_turns(users, systems):
    return make_turns(zipper(users, systems))


def exemplar(name: str, goal_text: str, texts: list[str]) -> Exemplar:
    return Exemplar(goal=parse_goal(goal_text), turns=make_turns(texts), exemplar_id=name)


EXEMPLAR_A = exemplar(
    "exemplar-taxi",
    "{'taxi': {'info': {'destination': 'pizza hut fen ditton', 'leaveAt': '17:15'}, "
    "'reqt': ['car type', 'phone']}}",
    [
        "I need a taxi to pizza hut fen ditton leaving after 17:15.",
        "I have booked a [value_car] for you . the contact number is [value_phone] .",
        f"great, thank you! {END}",
    ])

EXEMPLAR_B = exemplar(
    "exemplar-attraction",
    "{'attraction': {'info': {'type': 'museum', 'area': 'centre'}, 'reqt': ['entrance fee']}}",
    [
        "Can you recommend a museum in the centre of town?",
        "[value_name] is in the [value_area] and has [value_choice] exhibits . "
        "the entrance fee is [value_price] .",
        f"perfect, that is all I needed. {END}",
    ])

EXEMPLARS = [EXEMPLAR_A, EXEMPLAR_B]


def successful_dialogue_turns():
    texts = zipper(
        [u.replace(f" {END}", "").replace(END, "").strip() for u in SUCCESSFUL_USER_SCRIPT],
        SUCCESSFUL_TOD_SCRIPT)
    raws = zipper(SUCCESSFUL_USER_SCRIPT, SUCCESSFUL_TOD_SCRIPT)
    return make_turns(texts, raws)
