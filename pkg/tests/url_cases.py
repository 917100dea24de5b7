"""URL grammar fixture table: (input, expected family value label, expected value).

Covers all six format families, reserved-path collisions, case variants,
suffixed paths, percent-encoding, and non-channel URLs (expected None).
"""

URL_CASES = [
    # channel IDs (case-preserving, /channel/UC + 22 chars)
    ("/channel/UCaaaaaaaaaaaaaaaaaaaaaa", "channel_id", "UCaaaaaaaaaaaaaaaaaaaaaa"),
    ("/channel/UCY30JRSgfhYXA6i6xX1erWg/videos", "channel_id", "UCY30JRSgfhYXA6i6xX1erWg"),
    ("/channel/UC-lHJZR3Gqxm24_Vd_AJ5Yw?feature=guide", "channel_id", "UC-lHJZR3Gqxm24_Vd_AJ5Yw"),
    ("https://www.youtube.com/channel/UCBJycsmduvYEL83R_U4JriQ", "channel_id", "UCBJycsmduvYEL83R_U4JriQ"),
    ("/channel/UCX6OQ3DkcsbYNE6H8uQQuVA/about", "channel_id", "UCX6OQ3DkcsbYNE6H8uQQuVA"),
    ("/channel/UCaaaaaaaaaaaaaaaaaaaaaa#tab", "channel_id", "UCaaaaaaaaaaaaaaaaaaaaaa"),
    ("/channel/UCshort", None, None),
    ("/channel/UCaaaaaaaaaaaaaaaaaaaaaaa", None, None),  # 23 chars after UC
    ("/channel/", None, None),
    # usernames (/user/, case-insensitive, 1-20 alphanumeric)
    ("/user/smosh", "username", "smosh"),
    ("/user/SMOSH/videos", "username", "smosh"),
    ("/user/Smosh?feature=mhee", "username", "smosh"),
    ("http://youtube.com/user/geriatric1927", "username", "geriatric1927"),
    ("youtube.com/user/smosh", "username", "smosh"),
    ("/user/a", "username", "a"),
    ("/user/abcdefghij0123456789", "username", "abcdefghij0123456789"),
    ("/user/abcdefghij01234567890", None, None),  # 21 chars
    ("/user/sm-osh", None, None),  # hyphen not in the username alphabet
    ("/user/", None, None),
    ("/USER/smosh", None, None),  # prefix is case-significant
    # legacy profile URLs (/profile?user=)
    ("/profile?user=smosh", "legacy", "smosh"),
    ("/profile?user=SMOSH&feature=old", "legacy", "smosh"),
    ("/profile?foo=1&user=Bob", "legacy", "bob"),
    ("/profile", None, None),
    ("/profile?user=", None, None),
    ("/profile?user=toolongusername1234567", None, None),
    ("/profile?name=smosh", None, None),  # only the user parameter counts
    # custom names (/c/)
    ("/c/SomeChannel", "custom", "somechannel"),
    ("/c/SomeChannel/videos", "custom", "somechannel"),
    ("/c/MyChan?view=1", "custom", "mychan"),
    ("https://www.youtube.com/c/veritasium", "custom", "veritasium"),
    ("/c/chan-nel", None, None),
    ("/c/", None, None),
    # handles (/@, 3-30 of [a-z0-9_-])
    ("/@MrBeast", "handle", "mrbeast"),
    ("/@Some_Handle-1/about", "handle", "some_handle-1"),
    ("/@abc", "handle", "abc"),
    ("/@ab", None, None),  # below 3 chars
    ("/@handle.name", None, None),  # dot not in the handle alphabet
    ("/@123456789012345678901234567890", "handle", "123456789012345678901234567890"),
    ("/@1234567890123456789012345678901", None, None),  # 31 chars
    ("/@MrBeast#tab", "handle", "mrbeast"),
    # bare vanity paths
    ("/smosh", "vanity", "smosh"),
    ("/Smosh/videos", "vanity", "smosh"),
    ("/fred?feature=x", "vanity", "fred"),
    ("/abcdefghij0123456789", "vanity", "abcdefghij0123456789"),
    ("/abcdefghij01234567890", None, None),
    ("/sm-osh", None, None),
    ("/smosh.html", None, None),
    ("//", None, None),
    # reserved site paths never parse as vanity
    ("/watch", None, None),
    ("/watch?v=abc", None, None),
    ("/results?search_query=x", None, None),
    ("/results", None, None),
    ("/feed/subscriptions", None, None),
    ("/playlist?list=PL123", None, None),
    ("/about", None, None),
    ("/t/terms", None, None),
    ("/embed/xyz123", None, None),
    ("/browse", None, None),
    ("/user", None, None),
    ("/channel", None, None),
    ("/c", None, None),
    # percent-encoding is decoded once before matching
    ("/user/smosh%2Fvideos", "username", "smosh"),
    ("/%75ser/smosh", "username", "smosh"),
    ("/user/Sm%6Fsh", "username", "smosh"),
    # non-channel inputs
    ("", None, None),
    ("not a url", None, None),
    ("https://www.youtube.com/watch?v=dQw4w9WgXcQ", None, None),
    ("https://www.youtube.com/", None, None),
]
