try:
    run()
except (KeyError, ValueError) as err:
    report(err)
except Exception:
    raise
else:
    done()
