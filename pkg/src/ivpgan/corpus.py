"""A small fixed set of drug-like molecules used by the synthetic table generator."""

DRUG_LIKE_SMILES = (
    "CC(=O)Oc1ccccc1C(=O)O",  # aspirin
    "CC(C)Cc1ccc(cc1)C(C)C(=O)O",  # ibuprofen
    "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",  # caffeine
    "CC(=O)Nc1ccc(O)cc1",  # paracetamol
    "COc1ccc2cc(ccc2c1)C(C)C(=O)O",  # naproxen
    "CN1CCC[C@H]1c1cccnc1",  # nicotine
    "OC(=O)Cc1ccccc1Nc1c(Cl)cccc1Cl",  # diclofenac
    "CC(C)NCC(O)COc1cccc2ccccc12",  # propranolol
    "CN(C)CCCN1c2ccccc2CCc2ccccc12",  # imipramine
    "Clc1ccc2c(c1)C(=NCC(=O)N2C)c1ccccc1",  # diazepam-like
    "CC12CCC3C(CCc4cc(O)ccc34)C1CCC2O",  # estradiol
    "NC(=O)c1cccnc1",  # nicotinamide
    "OC[C@H]1O[C@@H](O)[C@H](O)[C@@H](O)[C@@H]1O",  # glucose
    "C1CCC(CC1)N",  # cyclohexylamine
    "c1ccc2[nH]ccc2c1",  # indole
    "O=C(O)c1ccncc1",  # isonicotinic acid
    "CCN(CC)CCOC(=O)c1ccc(N)cc1",  # procaine
    "CC(C)(C)NCC(O)c1ccc(O)c(CO)c1",  # salbutamol
    "CS(=O)(=O)Nc1ccc(cc1)[N+](=O)[O-]",  # nitro sulfonamide
    "Nc1ccc(cc1)S(=O)(=O)Nc1ncccn1",  # sulfadiazine
    "COc1cc2c(cc1OC)CCN=C2",  # dihydroisoquinoline
    "c1ccc(cc1)-c1ccccc1",  # biphenyl
    "O=C1NC(=O)C(N1)(c1ccccc1)c1ccccc1",  # phenytoin
    "CC(N)Cc1ccccc1",  # amphetamine
    "OC(=O)C(O)=O",  # oxalic acid
    "CCOC(=O)C1=C(C)NC(C)=C(C1c1cccc(c1)[N+](=O)[O-])C(=O)OC",  # nitrendipine
    "Cc1ncc(n1CCO)[N+](=O)[O-]",  # metronidazole
    "CN1CCN(CC1)c1ccc2nccnc2c1",  # quinoxaline piperazine
    "FC(F)(F)c1ccc(Oc2ccccc2)cc1",  # trifluoromethyl diaryl ether
    "Brc1ccc(cc1)C(=O)NCC#N",  # bromobenzamide nitrile
    "Ic1ccc(O)cc1",  # 4-iodophenol
    "OB(O)c1ccccc1",  # phenylboronic acid
    "CP(=O)(O)OCC",  # phosphonate
    "c1csc(n1)N",  # 2-aminothiazole
    "c1ccoc1",  # furan
    "C1=CC=CC=C1O",  # phenol, kekule
    "CC#CC(=O)N1CCC(CC1)Oc1ccccc1",  # alkynamide
    "O=C(Nc1ccccc1)Nc1ccccc1",  # diphenylurea
    "N#Cc1ccc(cc1)C(=O)N",  # 4-cyanobenzamide
    "CC1=C(C(=O)c2ccccc2C1=O)C",  # dimethylnaphthoquinone
    "c1ccc2c(c1)ccc1ccccc12",  # phenanthrene
    "C1CC2CCC1C2",  # norbornane
    "C1CC11CC1",  # spiropentane
    "OCCN1CCN(CC1)CCO",  # piperazine diethanol
    "CC(C)C[C@H](N)C(=O)O",  # leucine
    "N[C@@H](Cc1c[nH]c2ccccc12)C(=O)O",  # tryptophan
    "[Na+].[O-]C(=O)c1ccccc1",  # sodium benzoate
    "C[N+](C)(C)CCO",  # choline
    "OC(=O)CCc1c[nH]cn1",  # imidazolepropionic acid
    "Fc1ccc(cc1)C(=O)CCCN1CCC(O)(CC1)c1ccc(Cl)cc1",  # haloperidol
    "CC(=O)c1ccc(s1)C",  # acetylmethylthiophene
    "COC(=O)C1=CC=CN1",  # pyrrole ester, kekule
    "O=S1(=O)NC(=O)c2ccccc12",  # saccharin
    "CCCCCCCCCCCCCCCC(=O)O",  # palmitic acid
    "C=CC(=O)OC",  # methyl acrylate
    "ClC(Cl)(Cl)Cl",  # carbon tetrachloride
    "c1cc2ccc3cccc4ccc(c1)c2c34",  # pyrene
    "CC1(C)SC2C(NC(=O)Cc3ccccc3)C(=O)N2C1C(=O)O",  # penicillin G
    "OC1=CC(=O)c2ccccc2C1=O",  # hydroxynaphthoquinone
    "Cn1cnc2c1c(=O)[nH]c(=O)n2C",  # theophylline-like
)
