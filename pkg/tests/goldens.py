"""Frozen expected extraction results for the fixture page corpus.

Values were fixed when the pages were hand-built; tests assert exact
equality.  `None` means the field must be absent.
"""

PAGE_GOLDENS = [
    {
        "file": "early_2007_geriatric.html",
        "url": "https://www.youtube.com/user/geriatric1927",
        "timestamp": "20070815120000",
        "era": "early_2006_2009",
        "subs": 1927,
        "subs_exact": True,
        "channel_id": None,
        "username": "geriatric1927",
        "handle": None,
        "views": 2345678,
        "join_date": "2006-08-05",
        "keywords": None,
    },
    {
        "file": "early_2008_smosh.html",
        "url": "https://www.youtube.com/user/smosh",
        "timestamp": "20081103000000",
        "era": "early_2006_2009",
        "subs": 234567,
        "subs_exact": True,
        "channel_id": None,
        "username": "smosh",
        "handle": None,
        "views": 120456789,
        "join_date": "2005-11-19",
        "keywords": None,
    },
    {
        "file": "classic_2010_rwj.html",
        "url": "https://www.youtube.com/user/raywilliamjohnson",
        "timestamp": "20101205000000",
        "era": "classic_2010_2012",
        "subs": 2123456,
        "subs_exact": True,
        "channel_id": None,
        "username": "raywilliamjohnson",
        "handle": None,
        "views": 1234567890,
        "join_date": "2008-05-07",
        "keywords": ("comedy", "vlog", "viral videos", "commentary"),
    },
    {
        "file": "classic_2012_smosh.html",
        "url": "https://www.youtube.com/user/smosh",
        "timestamp": "20120601000000",
        "era": "classic_2010_2012",
        "subs": 3456789,
        "subs_exact": True,
        "channel_id": "UCY30JRSgfhYXA6i6xX1erWg",
        "username": "smosh",
        "handle": None,
        "views": 2100000000,
        "join_date": "2005-11-19",
        "keywords": ("smosh", "comedy", "sketch", "food battle"),
    },
    {
        "file": "one_channel_2013_smosh.html",
        "url": "https://www.youtube.com/user/smosh",
        "timestamp": "20130115000000",
        "era": "one_channel_2013_2016",
        "subs": 6561257,
        "subs_exact": True,
        "channel_id": "UCY30JRSgfhYXA6i6xX1erWg",
        "username": "smosh",
        "handle": None,
        "views": 2523443956,
        "join_date": "2005-11-19",
        "keywords": ("smosh", "comedy", "sketch", "food battle"),
    },
    {
        "file": "one_channel_2015_pewdiepie.html",
        "url": "https://www.youtube.com/channel/UC-lHJZR3Gqxm24_Vd_AJ5Yw",
        "timestamp": "20150420000000",
        "era": "one_channel_2013_2016",
        "subs": 36123456,
        "subs_exact": True,
        "channel_id": "UC-lHJZR3Gqxm24_Vd_AJ5Yw",
        "username": "pewdiepie",
        "handle": None,
        "views": None,
        "join_date": None,
        "keywords": ("pewdiepie", "gaming", "let's play"),
    },
    {
        "file": "polymer_2019_mkbhd.html",
        "url": "https://www.youtube.com/channel/UCBJycsmduvYEL83R_U4JriQ",
        "timestamp": "20190715000000",
        "era": "polymer_2017_2023",
        "subs": 8900000,
        "subs_exact": False,
        "channel_id": "UCBJycsmduvYEL83R_U4JriQ",
        "username": "marquesbrownlee",
        "handle": None,
        "views": None,
        "join_date": None,
        "keywords": ("tech", "reviews", "smartphones", "mkbhd"),
    },
    {
        "file": "polymer_2023_mrbeast.html",
        "url": "https://www.youtube.com/@MrBeast",
        "timestamp": "20230310000000",
        "era": "polymer_2017_2023",
        "subs": 135000000,
        "subs_exact": False,
        "channel_id": "UCX6OQ3DkcsbYNE6H8uQQuVA",
        "username": None,
        "handle": "mrbeast",
        "views": None,
        "join_date": None,
        "keywords": ("mrbeast", "challenge", "giveaway"),
    },
]
