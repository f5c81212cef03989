#!/usr/bin/env python3
"""Generate the synthetic six-turn dialogue fixture under data/fixture/.

The output mimics the layout of the Turk Dialogues corpus closely enough to
exercise ingestion, simulation and evaluation end to end. It is NOT the real
corpus; point the tools at the real file when it is available.

    python3 scripts/make_fixture_corpus.py

Train split is written as tab-separated records, test split as block records,
so both raw grammars accepted by `abbrex ingest` are covered.
"""

import random
from pathlib import Path

SEED = 20230213
N_TRAIN = 1200
N_TEST = 280

FOOD = ["pizza", "pasta", "tacos", "soup", "salad", "sushi", "burgers", "pancakes", "curry", "noodles"]
PLACES = ["the park", "the beach", "the mall", "the library", "the gym", "the office", "the store", "the lake", "the city", "the museum"]
DAYS = ["today", "tomorrow", "tonight", "this weekend", "on friday", "on monday", "next week", "this morning"]
PEOPLE = ["my sister", "my brother", "my mom", "my dad", "my friend", "my boss", "my neighbor", "my cousin", "the kids", "my husband", "my wife"]
ACTIVITIES = ["play tennis", "go swimming", "watch a movie", "read a book", "go hiking", "bake cookies", "go fishing", "play cards", "go shopping", "clean the house"]
FEELINGS = ["tired", "happy", "busy", "hungry", "excited", "sick", "bored", "nervous", "sleepy", "great"]
THINGS = ["car", "phone", "laptop", "bike", "keys", "wallet", "jacket", "umbrella", "glasses", "bag"]
ROOMS = ["bedroom", "kitchen", "backyard", "garage", "basement", "living room", "bathroom", "office"]
MUSIC = ["jazz", "rock", "country music", "classical music", "pop music", "the blues", "hip hop"]
SHOWS = ["the news", "a cooking show", "the game", "a documentary", "that new series", "an old movie"]
TIMES = ["7", "8", "noon", "6 pm", "9 am", "5", "10"]
WEATHER = ["cold", "hot", "rainy", "windy", "sunny", "cloudy", "snowy"]


def pick(rng, xs):
    return rng.choice(xs)


def cap(s):
    return s[0].upper() + s[1:]


def topic_food(r):
    f1, f2 = pick(r, FOOD), pick(r, FOOD)
    return [
        pick(r, [f"What do you want for dinner {pick(r, DAYS)}?", "What should we eat tonight?", "Are you hungry yet?", "Do you want to get lunch?"]),
        pick(r, [f"I'd love some {f1}.", f"How about {f1}?", f"I'm in the mood for {f1}.", f"Yes, let's get {f1}."]),
        pick(r, [f"We had {f1} yesterday, how about {f2}?", f"Do you want to cook or order {f1}?", f"Where do you want to get {f1}?", "Should I call and order now?"]),
        pick(r, [f"Sure, {f2} sounds good too.", "Let's order, I'm too tired to cook.", "The place near the office is good.", "Yes, please call them now."]),
        pick(r, ["Okay, I'll order it in a few minutes.", f"Great, it should be here by {pick(r, TIMES)}.", "Do you want anything to drink with it?", "I'll pick it up on the way home."]),
        pick(r, ["Thanks, I'll set the table.", "Just water for me, thanks.", "Sounds good, see you soon.", "Perfect, I can't wait."]),
    ]


def topic_plans(r):
    a, p, d = pick(r, ACTIVITIES), pick(r, PLACES), pick(r, DAYS)
    return [
        pick(r, [f"Do you have any plans {d}?", f"What are you doing {d}?", f"Are you free {d}?", f"Want to {a} {d}?"]),
        pick(r, [f"I was thinking we could {a}.", f"Not really, I might {a}.", f"I'm going to {p} with {pick(r, PEOPLE)}.", "I have to work, sadly."]),
        pick(r, [f"That sounds fun, can I come to {p}?", "What time are you leaving?", f"Is {pick(r, PEOPLE)} coming too?", "Maybe we can meet after that."]),
        pick(r, [f"Sure, we're leaving at {pick(r, TIMES)}.", "Of course, the more the merrier.", "I think so, I'll ask.", "Yes, let's meet around noon."]),
        pick(r, ["Great, I'll bring some snacks.", "Should I drive or will you?", f"I hope it won't be too {pick(r, WEATHER)}.", "I'll text you when I'm ready."]),
        pick(r, ["I can drive, no problem.", "Sounds like a plan.", "Okay, see you then.", "Don't forget your jacket."]),
    ]


def topic_feeling(r):
    f = pick(r, FEELINGS)
    return [
        pick(r, ["How are you feeling today?", "How was your day?", "You look tired, are you okay?", "How did you sleep last night?"]),
        pick(r, [f"I'm a little {f}, to be honest.", f"Pretty {f}, it was a long day.", "Not great, I didn't sleep well.", f"I feel {f} today."]),
        pick(r, ["Oh, I'm sorry to hear that.", "Do you want to talk about it?", "Why, what happened?", "Is there anything I can do?"]),
        pick(r, ["Work was just one meeting after another.", "I've been sitting all day.", "My back hurts from the new chair.", "I was up late with the kids."]),
        pick(r, ["You should take a nap.", "Maybe go to bed early tonight.", "Let me make you some tea.", "I'll cook dinner so you can rest."]),
        pick(r, ["Thank you, that would be nice.", "That's a good idea.", "You're the best, thanks.", "I think I will, thanks."]),
    ]


def topic_lost(r):
    t, room = pick(r, THINGS), pick(r, ROOMS)
    return [
        pick(r, [f"Have you seen my {t}?", f"I can't find my {t} anywhere.", f"Where did you put my {t}?", f"Did I leave my {t} here?"]),
        pick(r, [f"I saw it in the {room} this morning.", f"Did you check the {room}?", "No, when did you last have it?", f"I think it's in the {room}."]),
        pick(r, [f"I looked in the {room} already.", "I had it when I came home.", f"It's not in the {room}.", "I'll check again."]),
        pick(r, [f"Maybe it's in the {pick(r, ROOMS)} then.", "Did you look under the couch?", "Try calling it, maybe we can hear it.", "Check your coat pockets."]),
        pick(r, ["Found it, it was in my pocket.", "I found it under the couch.", "Still nothing, this is so annoying.", f"Oh, it was in the {pick(r, ROOMS)}."]),
        pick(r, ["Good, I'm glad you found it.", "I'll help you look after dinner.", "You always lose things.", "Great, now we can go."]),
    ]


def topic_music(r):
    m = pick(r, MUSIC)
    return [
        pick(r, ["What kind of music do you listen to?", "Do you like music?", "What are you listening to?", "Have you heard the new album?"]),
        pick(r, [f"I mostly listen to {m}.", f"I really like {m}.", f"I've been listening to {m} lately.", f"Mostly {m}, how about you?"]),
        pick(r, [f"I like {pick(r, MUSIC)} more.", "Do you play any instruments?", "Have you been to any concerts?", "Who is your favorite singer?"]),
        pick(r, ["I play the guitar a little.", "I went to a concert last month.", "I used to play the piano.", "I don't really have a favorite."]),
        pick(r, ["We should go to a show together.", "That's cool, you should play for me.", "I'd love to learn an instrument.", "Let me know if you find a good band."]),
        pick(r, ["Sure, that would be fun.", "Maybe someday, I'm not very good.", "It's never too late to learn.", "I will, I'll send you a link."]),
    ]


def topic_weather(r):
    w = pick(r, WEATHER)
    return [
        pick(r, ["How is the weather outside?", "Is it going to rain today?", "Should I bring an umbrella?", f"Is it {w} out there?"]),
        pick(r, [f"It's pretty {w} right now.", f"It looks {w}, so maybe bring a jacket.", "I think it will rain later.", "It's nice and sunny."]),
        pick(r, ["Then I'll wear my boots.", "Should we still go for a walk?", "I hope it clears up by the afternoon.", "Good, I want to go outside."]),
        pick(r, ["We can walk later if it stops.", "Let's wait and see.", "I heard it will be nice tomorrow.", "Yes, let's go before it gets dark."]),
        pick(r, ["Okay, let me know when you're ready.", "I'll check the forecast again.", "Great, I'll get my shoes.", "Maybe we should stay in and watch a movie."]),
        pick(r, ["I'm ready whenever you are.", "Good idea, I'll make popcorn.", "Sounds good to me.", "Let's do that."]),
    ]


def topic_tv(r):
    s = pick(r, SHOWS)
    return [
        pick(r, ["What do you want to watch tonight?", "Is there anything good on TV?", f"Do you want to watch {s}?", "Did you see the game last night?"]),
        pick(r, [f"I was hoping to watch {s}.", "I don't know, you pick.", "Yes, it was a great game.", f"Let's watch {s} after dinner."]),
        pick(r, [f"I'd rather watch {pick(r, SHOWS)}.", "Okay, but I get to pick next time.", "Who won in the end?", "Can we start it now?"]),
        pick(r, ["Fine, we can watch that.", "Our team won by two points.", "Sure, give me five minutes.", "Let's start after I finish the dishes."]),
        pick(r, ["I'll grab the blankets.", "Do you want me to make some snacks?", "I can't believe they won.", "Hurry up, it's about to start."]),
        pick(r, ["Yes please, I'm a bit hungry.", "Me neither, it was amazing.", "I'm coming, just a second.", "Thanks, I'll turn off the lights."]),
    ]


def topic_visit(r):
    p = pick(r, PEOPLE)
    return [
        pick(r, [f"When is {p} coming to visit?", f"Did you call {p} today?", f"How is {p} doing?", f"Is {p} coming for dinner?"]),
        pick(r, [f"I think {p} is coming {pick(r, DAYS)}.", "I called this morning, everything is fine.", "They're doing well, thanks for asking.", "I'm not sure, I'll ask later."]),
        pick(r, ["Should we clean up before they come?", "That's good to hear.", "Do they need a ride from the airport?", "Tell them I said hello."]),
        pick(r, ["Yes, the kitchen is a mess.", "No, they will take a taxi.", "I will, they miss you too.", "Let's clean the living room at least."]),
        pick(r, ["I'll vacuum if you do the dishes.", "Okay, I'll make up the guest bed.", "Should we get some flowers?", "I'll go to the store for groceries."]),
        pick(r, ["Deal, let's get started.", "That would be really nice.", "Great, get some milk too.", "Thanks, I really appreciate it."]),
    ]


def topic_health(r):
    return [
        pick(r, ["Did you take your medicine today?", "When is your next doctor's appointment?", "How is your back feeling?", "Did you sleep well last night?"]),
        pick(r, ["Yes, I took it after breakfast.", f"It's {pick(r, DAYS)} at {pick(r, TIMES)}.", "It's a little better, thanks.", "Not really, I woke up a lot."]),
        pick(r, ["Do you need me to come with you?", "Good, don't forget the evening one.", "Maybe you should see a doctor.", "Let's try to go to bed earlier."]),
        pick(r, ["That would be helpful, thank you.", "I set an alarm so I won't forget.", "I'll call them in the morning.", "Okay, I'll try tonight."]),
        pick(r, ["I'll drive you there.", "Let me know if you need anything.", "Drink some water before bed.", "I left the pills on the kitchen table."]),
        pick(r, ["Thanks, you're so kind.", "I will, good night.", "Okay, I'll get them later.", "I appreciate your help."]),
    ]


def topic_work(r):
    return [
        pick(r, ["How was work today?", "Are you working late again?", "Did you finish the report?", "When is your meeting tomorrow?"]),
        pick(r, ["It was busy, but I got a lot done.", "Yes, I have a deadline on friday.", "Almost, I still need to check the numbers.", f"It's at {pick(r, TIMES)} in the morning."]),
        pick(r, ["Do you need any help with it?", "Don't stay up too late.", "Your boss should give you a raise.", "Are you ready for it?"]),
        pick(r, ["No thanks, I can handle it.", "I know, I'll try to finish early.", "I wish, maybe next year.", "I think so, I practiced a lot."]),
        pick(r, ["Well, let me know if you change your mind.", "I'll make coffee for you.", "Good luck, you'll do great.", "I'm proud of you for working so hard."]),
        pick(r, ["Thanks, that means a lot.", "Coffee would be great, thanks.", "I hope so, I'm a bit nervous.", "Thank you, I'll tell you how it goes."]),
    ]


TOPICS = [topic_food, topic_plans, topic_feeling, topic_lost, topic_music, topic_weather, topic_tv, topic_visit, topic_health, topic_work]


def make_id(r, chain):
    nums = "_".join(str(r.randint(1, 1500)) for _ in range(6))
    return f"chain{chain}_{nums}"


def generate(r, n, used):
    out = []
    while len(out) < n:
        topic = pick(r, TOPICS)
        turns = topic(r)
        # A few long turns so the length filter has something to drop.
        if r.random() < 0.08:
            i = r.randrange(6)
            turns[i] = turns[i].rstrip(".?!") + ", and I really do not know what else we could do about it."
        did = make_id(r, pick(r, [2, 3]))
        if did in used:
            continue
        used.add(did)
        out.append((did, turns))
    return out


def main():
    r = random.Random(SEED)
    used = set()
    train = generate(r, N_TRAIN, used)
    test = generate(r, N_TEST, used)
    root = Path(__file__).resolve().parent.parent / "data" / "fixture"
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "train.txt", "w") as f:
        for did, turns in train:
            f.write(did + "\t" + "\t".join(turns) + "\n")
    with open(root / "test.txt", "w") as f:
        for did, turns in test:
            f.write(did + "\n")
            for t in turns:
                f.write(t + "\n")
            f.write("\n")


if __name__ == "__main__":
    main()
