CS_NV	NV_ENDINGS
CS_NC	NC_ENDINGS
CS_V	V_ENDINGS
CS_VH	VH_ENDINGS
CS_VC	VC_ENDINGS
CS_A1	A1_ENDINGS	EU_DROP
CS_A1k	A1K_ENDINGS
CS_ADV	ADV_ENDINGS
