from src.cli.commands import run

# Same as the pb-chrono console script, e.g.:
#   python app.py simulate --scenario 2 --seed 42 --out core.csv
#   python app.py crs core.csv --variant mc --draws 10000
if __name__ == '__main__':
    run()
