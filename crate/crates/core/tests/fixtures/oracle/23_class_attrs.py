class Config:
    debug = False
    level = 3
